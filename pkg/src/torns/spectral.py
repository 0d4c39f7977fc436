"""Fourier representation of periodic divergence-free velocity fields on [0, L]^2.

Fields are stored as truncated Fourier series u(x) = sum_j u_hat_j exp(i k_j . x)
with physical wavenumbers k_j = (2*pi/L) * j on the integer lattice
j in {-N/2+1, ..., N/2}^2 (numpy fft ordering).  All inner products and norms
carry the physical measure dx over [0, L]^2, so the L2 norm of a coefficient
array c is L * sqrt(sum |c|^2).

The first eigenvalue of the Stokes operator on this lattice is
lambda_1 = 4*pi^2 / L^2.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .rng import rng_for

__all__ = [
    "WaveGrid",
    "SpectralField",
    "PhysicalField",
    "make_grid",
    "leray_project",
    "divergence",
    "sobolev_norm",
    "inner",
    "apply_stokes_power",
    "nonlinear_term",
    "grad_linf",
    "to_physical",
    "to_spectral",
    "random_divfree_field",
    "field_violations",
]


class WaveGrid:
    """Wavenumber lattice, dealiasing mask and collocation points for one resolution.

    Parameters
    ----------
    L : float
        Domain side length, > 0.
    N : int
        Modes (and collocation points) per dimension; even, >= 4.
    """

    def __init__(self, L: float, N: int):
        if not float(L) > 0.0:
            raise ValueError(f"L must be positive, got {L}")
        N = int(N)
        if N < 4:
            raise ValueError(f"N must be >= 4, got {N}")
        if N % 2 != 0:
            raise ValueError(f"N must be even, got {N}")
        self.L = float(L)
        self.N = N

        j = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)  # 0,1,...,N/2-1,-N/2,...,-1
        self.jx = j[:, None]
        self.jy = j[None, :]
        k0 = 2.0 * np.pi / self.L
        self.kx = k0 * self.jx.astype(np.float64)
        self.ky = k0 * self.jy.astype(np.float64)
        self.k2 = self.kx * self.kx + self.ky * self.ky
        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0.0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv
        # 2/3 rule, strict form: keep 3|j| < N in each direction, so quadratic
        # products of retained modes are exactly alias-free (for N divisible by
        # 3 the inclusive cutoff would let the corner modes alias onto +-N/3)
        self.dealias_mask = (3 * np.abs(self.jx) < N) & (3 * np.abs(self.jy) < N)
        self.x = np.arange(N) * (self.L / N)

    @property
    def lambda1(self) -> float:
        """First Stokes eigenvalue 4*pi^2 / L^2."""
        return 4.0 * np.pi**2 / self.L**2

    def __eq__(self, other) -> bool:
        return isinstance(other, WaveGrid) and other.L == self.L and other.N == self.N

    def __hash__(self):
        return hash((self.L, self.N))

    def __repr__(self):
        return f"WaveGrid(L={self.L!r}, N={self.N})"


def make_grid(L: float, N: int) -> WaveGrid:
    """Build a WaveGrid, rejecting odd or too-small N and non-positive L."""
    return WaveGrid(L, N)


class SpectralField:
    """Two-component velocity field as Fourier coefficients on a WaveGrid.

    coeffs has shape (2, N, N) complex128; coeffs[c][j1, j2] is the series
    coefficient of component c at lattice mode (j1, j2) in fft ordering.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: WaveGrid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (2, grid.N, grid.N):
            raise ValueError(f"coeffs shape {coeffs.shape} does not match grid N={grid.N}")
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def zero(cls, grid: WaveGrid) -> "SpectralField":
        return cls(grid, np.zeros((2, grid.N, grid.N), dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * a)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __repr__(self):
        return f"SpectralField(N={self.grid.N}, L={self.grid.L:g}, |u|={sobolev_norm(self, 0.0):.6g})"


class PhysicalField:
    """Velocity samples on the N x N collocation lattice x_ab = (a*L/N, b*L/N)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: WaveGrid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (2, grid.N, grid.N):
            raise ValueError(f"values shape {values.shape} does not match grid N={grid.N}")
        self.grid = grid
        self.values = values


def _check_same_grid(u, v) -> None:
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid!r} vs {v.grid!r}")


def _project_coeffs(coeffs: np.ndarray, grid: WaveGrid) -> np.ndarray:
    """Per-mode removal of the component along k; zero mode forced to 0."""
    div = grid.kx * coeffs[0] + grid.ky * coeffs[1]
    fac = div * grid.inv_k2
    out = np.empty_like(coeffs)
    out[0] = coeffs[0] - grid.kx * fac
    out[1] = coeffs[1] - grid.ky * fac
    out[:, 0, 0] = 0.0
    return out


def leray_project(u: SpectralField) -> SpectralField:
    """Helmholtz-Leray projection onto divergence-free, zero-mean fields.

    Per mode: u_hat -> u_hat - k (k . u_hat) / |k|^2, and u_hat_0 -> 0.
    Idempotent up to roundoff; total (never raises).
    """
    return SpectralField(u.grid, _project_coeffs(u.coeffs, u.grid))


def divergence(u: SpectralField) -> np.ndarray:
    """Spectral coefficients of div u: per mode i k . u_hat. Shape (N, N)."""
    g = u.grid
    return 1j * (g.kx * u.coeffs[0] + g.ky * u.coeffs[1])


def sobolev_norm(u: SpectralField, s: float) -> float:
    """H^s norm ||A^{s/2} u|| = sqrt(L^2 * sum |k|^(2s) |u_hat|^2).

    s = 0 gives the physical L2 norm; s must be >= 0.
    """
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    g = u.grid
    e = (np.abs(u.coeffs[0]) ** 2 + np.abs(u.coeffs[1]) ** 2)
    if s == 0.0:
        total = e.sum()
    elif s == 1.0:
        total = (g.k2 * e).sum()
    else:
        total = (g.k2**s * e).sum()
    return g.L * float(np.sqrt(total))


def inner(u: SpectralField, v: SpectralField) -> float:
    """Real L2 inner product (u, v) = integral of u . v over the torus."""
    _check_same_grid(u, v)
    return u.grid.L**2 * float(np.real(np.vdot(v.coeffs, u.coeffs)))


def apply_stokes_power(u: SpectralField, p: float) -> SpectralField:
    """Apply A^p, diagonal per mode with eigenvalue |k|^(2p); zero mode stays 0."""
    g = u.grid
    if p == 0.0:
        return u.copy()
    if p > 0:
        w = g.k2**p
        if not float(p).is_integer():
            w = np.where(g.k2 > 0.0, w, 0.0)
    else:
        w = np.where(g.k2 > 0.0, g.k2, 1.0) ** p
        w[0, 0] = 0.0
    return SpectralField(g, u.coeffs * w)


def to_physical(u: SpectralField) -> PhysicalField:
    """Evaluate the Fourier series on the collocation lattice."""
    vals = np.fft.ifft2(u.coeffs, axes=(-2, -1), norm="forward").real
    return PhysicalField(u.grid, vals)


def to_spectral(p: PhysicalField) -> SpectralField:
    """Fourier series coefficients of collocation samples (inverse of to_physical)."""
    coeffs = np.fft.fft2(p.values, axes=(-2, -1), norm="forward")
    return SpectralField(p.grid, coeffs)


def nonlinear_term(u: SpectralField, v: SpectralField) -> SpectralField:
    """Dealiased bilinear term B(u, v) = P((u . grad) v).

    v is differentiated spectrally; u and grad v are multiplied pointwise on
    the collocation grid; the product is transformed back, masked by the 2/3
    rule and Leray-projected.  For inputs supported inside the dealias mask
    the retained modes equal the exact Galerkin convolution.
    """
    _check_same_grid(u, v)
    g = u.grid
    work = np.empty((6, g.N, g.N), dtype=np.complex128)
    work[0:2] = u.coeffs
    work[2:4] = (1j * g.kx) * v.coeffs  # d/dx of both components
    work[4:6] = (1j * g.ky) * v.coeffs  # d/dy
    phys = np.fft.ifft2(work, axes=(-2, -1), norm="forward").real
    adv = np.empty((2, g.N, g.N))
    adv[0] = phys[0] * phys[2] + phys[1] * phys[4]
    adv[1] = phys[0] * phys[3] + phys[1] * phys[5]
    ah = np.fft.fft2(adv, axes=(-2, -1), norm="forward")
    ah *= g.dealias_mask
    return SpectralField(g, _project_coeffs(ah, g))


def _jacobian_samples(h: SpectralField, oversample: int) -> np.ndarray:
    """Entries (d_a h_b) of grad h sampled on an oversample*N grid; shape (2, 2, M, M)."""
    g = h.grid
    M = oversample * g.N
    idx = np.ix_(g.jx[:, 0] % M, g.jy[0] % M)
    out = np.empty((2, 2, M, M))
    for b in range(2):
        for a, k in ((0, g.kx), (1, g.ky)):
            d = 1j * k * h.coeffs[b]
            if oversample == 1:
                out[a, b] = np.fft.ifft2(d, norm="forward").real
            else:
                big = np.zeros((M, M), dtype=np.complex128)
                big[idx] = d
                out[a, b] = np.fft.ifft2(big, norm="forward").real
    return out


def grad_linf(h: SpectralField, norm: str = "op", oversample: int = 4) -> float:
    """Max over collocation points of a pointwise matrix norm of grad h.

    norm="op" uses the operator 2-norm of the 2x2 Jacobian (the norm that makes
    |integral |v|^2 |grad h|| <= ||grad h||_inf ||v||^2 valid); norm="maxabs"
    uses the largest absolute entry.  Band-limited h is evaluated on an
    oversampled grid to control the sampling error of the sup.
    """
    if norm not in ("op", "maxabs"):
        raise ValueError(f"unknown norm {norm!r}")
    J = _jacobian_samples(h, max(1, int(oversample)))
    if norm == "maxabs":
        return float(np.abs(J).max())
    # largest singular value of [[a,b],[c,d]] via trace/det of J^T J
    a, b = J[0, 0], J[0, 1]
    c, d = J[1, 0], J[1, 1]
    tr = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.maximum(tr * tr - 4.0 * det * det, 0.0)
    smax2 = 0.5 * (tr + np.sqrt(disc))
    return float(np.sqrt(smax2.max()))


def random_divfree_field(
    grid: WaveGrid,
    seed: int,
    norm: float = 1.0,
    profile: Callable[[np.ndarray], np.ndarray] | None = None,
    stream: int = 0,
    within_mask: bool = True,
) -> SpectralField:
    """Random zero-mean divergence-free field with prescribed L2 norm.

    Built from a random real streamfunction (u = perp-grad psi), so the result
    is exactly divergence-free and real in physical space.  profile maps |k|
    to a shell amplitude weight (default 1/(1+|k|^2)); the field is rescaled so
    sobolev_norm(result, 0) == norm.  Deterministic in (seed, stream).
    """
    g = grid
    rng = rng_for(seed, "field", stream)
    psi_phys = rng.standard_normal((g.N, g.N))
    psi = np.fft.fft2(psi_phys, norm="forward")
    kmag = np.sqrt(g.k2)
    if profile is None:
        w = 1.0 / (1.0 + g.k2)
    else:
        w = np.asarray(profile(kmag), dtype=np.float64)
    psi *= w * np.sqrt(g.inv_k2)  # velocity amplitude |k| |psi| follows the profile
    if within_mask:
        psi *= g.dealias_mask
    psi[0, 0] = 0.0
    coeffs = np.empty((2, g.N, g.N), dtype=np.complex128)
    coeffs[0] = -1j * g.ky * psi
    coeffs[1] = 1j * g.kx * psi
    u = SpectralField(g, coeffs)
    cur = sobolev_norm(u, 0.0)
    if cur == 0.0:
        raise ValueError("profile produced an identically zero field")
    u.coeffs *= norm / cur
    return u


def field_violations(u: SpectralField, rtol: float = 1e-13) -> list[str]:
    """Audit SpectralField invariants; returns human-readable violations (empty if valid).

    Checks finiteness, Hermitian symmetry (real physical field), zero mean and
    relative divergence below rtol.
    """
    out = []
    c = u.coeffs
    if not np.isfinite(c).all():
        out.append("coefficients contain NaN or Inf")
        return out
    scale = float(np.abs(c).max())
    if scale == 0.0:
        return out
    mirror = np.conj(c[:, ::-1, ::-1])
    mirror = np.roll(mirror, (1, 1), axis=(-2, -1))  # index map j -> -j mod N
    herm = float(np.abs(c - mirror).max())
    if herm > rtol * scale:
        out.append(f"Hermitian symmetry violated: max |u_hat(j) - conj(u_hat(-j))| = {herm:.3e}")
    mean = float(np.abs(c[:, 0, 0]).max())
    if mean > rtol * scale:
        out.append(f"nonzero mean mode: |u_hat(0)| = {mean:.3e}")
    g = u.grid
    div = np.abs(divergence(u))
    ref = float((np.sqrt(g.k2) * np.sqrt(np.abs(c[0]) ** 2 + np.abs(c[1]) ** 2)).max())
    if ref > 0 and float(div.max()) > rtol * ref:
        out.append(f"divergence too large: max |k . u_hat| = {div.max():.3e} (scale {ref:.3e})")
    return out
