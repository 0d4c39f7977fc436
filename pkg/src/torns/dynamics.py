"""Time integration of the deterministic, stochastic and OU-conjugated systems.

Three systems share one exponential-integrating-factor skeleton (the viscous
Stokes part is diagonal in Fourier space and treated exactly):

* deterministic:   du/dt + nu A u + B(u)             = f
* conjugated:      dv/dt + nu A v + B(v + h z(t))    = f - nu A h z(t) + h z(t)
  with z the scalar OU process, advanced pathwise with left-endpoint z_n
* Ito (EM):        du + (nu A u + B(u)) dt           = f dt + h dW
  exponential viscous part, explicit drift, additive noise applied after the
  linear solve

Schemes: "etd1" is the exponential Euler update u+ = E u + dt phi1 F(u);
"etd2" adds a second-order multistep correction dt (phi1+phi2) F_n - dt phi2
F_{n-1}, bootstrapped by one etd1 step; "em" uses the etd1 drift (the
stochastic solver's drift), so the h = 0 stochastic step reduces to the
deterministic one bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import spectral
from .noise import OUPath, WienerPath
from .spectral import SpectralField, WaveGrid, sobolev_norm

__all__ = [
    "SimConfig",
    "AssumptionReport",
    "State",
    "NormSeries",
    "BlowupError",
    "check_assumption",
    "conjugate",
    "step_deterministic",
    "step_random",
    "step_em_stochastic",
    "integrate",
    "taylor_green",
    "manufactured_forcing",
]

SCHEMES = ("etd1", "etd2", "em")


@dataclass(frozen=True)
class AssumptionReport:
    """Admissibility of the noise intensity h and the derived constants.

    lhs = ||grad h||_Linf / sqrt(pi), rhs = nu * lambda_1; admissible means
    lhs < rhs strictly.  When admissible, alpha in (0, 1] solves
    lhs = (1 - alpha) rhs, beta > 0 solves lhs (1 + beta) = rhs (1 - alpha/2)
    (beta = +inf when h = 0) and lam = alpha nu lambda_1 / 4.
    """

    lhs: float
    rhs: float
    satisfied: bool
    grad_linf_op: float
    grad_linf_maxabs: float
    alpha: float | None = None
    beta: float | None = None
    lam: float | None = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def summary(self) -> str:
        s = (
            f"satisfied={self.satisfied} lhs={self.lhs:.6g} rhs={self.rhs:.6g} "
            f"margin={self.margin:.6g} grad_linf_op={self.grad_linf_op:.6g} "
            f"grad_linf_maxabs={self.grad_linf_maxabs:.6g}"
        )
        if self.satisfied:
            s += f" alpha={self.alpha:.6g} beta={self.beta:.6g} lambda={self.lam:.6g}"
        return s


def check_assumption(h: SpectralField, nu: float, grid: WaveGrid) -> AssumptionReport:
    """Evaluate the noise-admissibility condition ||grad h||_Linf < sqrt(pi) nu lambda_1.

    A violated condition is a valid report (satisfied=False, constants absent),
    not an error.
    """
    if h.grid != grid:
        raise ValueError("h is not defined on the given grid")
    g_op = spectral.grad_linf(h, norm="op")
    g_ma = spectral.grad_linf(h, norm="maxabs")
    lam1 = grid.lambda1
    lhs = g_op / math.sqrt(math.pi)
    rhs = nu * lam1
    if not lhs < rhs:
        return AssumptionReport(lhs=lhs, rhs=rhs, satisfied=False,
                                grad_linf_op=g_op, grad_linf_maxabs=g_ma)
    alpha = 1.0 - lhs / rhs
    beta = math.inf if lhs == 0.0 else rhs * (1.0 - 0.5 * alpha) / lhs - 1.0
    lam = 0.25 * alpha * nu * lam1
    return AssumptionReport(lhs=lhs, rhs=rhs, satisfied=True,
                            grad_linf_op=g_op, grad_linf_maxabs=g_ma,
                            alpha=alpha, beta=beta, lam=lam)


@dataclass
class SimConfig:
    """Solver configuration: viscosity, grid, step, forcing f, noise intensity h.

    h must be band-limited inside the dealias mask (stands in for h in H^3 and
    keeps every A^p h exactly computable).  linear_only disables B (diagnostic
    mode for closed-form linear oracles).  u0 optionally carries initial data
    attached by a config preset.
    """

    nu: float
    grid: WaveGrid
    dt: float
    f: SpectralField
    h: SpectralField
    scheme: str = "etd2"
    seed: int = 0
    stride: int = 10
    t_end: float = 1.0
    u0: SpectralField | None = None
    linear_only: bool = False
    assumption: AssumptionReport | None = dc_field(default=None, repr=False)

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        for name, u in (("f", self.f), ("h", self.h)):
            if u.grid != self.grid:
                raise ValueError(f"{name} lives on {u.grid!r}, expected {self.grid!r}")
        outside = np.abs(self.h.coeffs[:, ~self.grid.dealias_mask])
        scale = float(np.abs(self.h.coeffs).max())
        if scale > 0 and float(outside.max()) > 1e-13 * scale:
            raise ValueError("h must be band-limited inside the dealias mask")
        if self.assumption is None:
            self.assumption = check_assumption(self.h, self.nu, self.grid)


@dataclass
class State:
    """Trajectory state: time, velocity field and the current OU value."""

    t: float
    u: SpectralField
    z: float = 0.0

    def copy(self) -> "State":
        return State(t=self.t, u=self.u.copy(), z=self.z)


@dataclass
class NormSeries:
    """Observer record: ||u||, ||u||_H1, ||u||_H2 and z sampled along a run."""

    t: np.ndarray
    norm_h: np.ndarray
    norm_h1: np.ndarray
    norm_h2: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


class BlowupError(RuntimeError):
    """A non-finite coefficient appeared; carries the last valid state."""

    def __init__(self, message: str, last_state: State):
        super().__init__(message)
        self.last_state = last_state


def conjugate(v: SpectralField, z: float, h: SpectralField) -> SpectralField:
    """The transformation u_h = v + h z linking the Ito and conjugated systems."""
    spectral._check_same_grid(v, h)
    return SpectralField(v.grid, v.coeffs + z * h.coeffs)


class _EtdStepper:
    """Shared exponential-integrating-factor machinery.

    Precomputes E = exp(-nu k^2 dt) and the phi1/phi2 weights; subclasses
    supply the explicit right side F.  etd2 keeps F_{n-1} between calls, so a
    stepper instance drives one trajectory.
    """

    def __init__(self, cfg: SimConfig, scheme: str | None = None):
        self.cfg = cfg
        g = cfg.grid
        z = -cfg.nu * cfg.dt * g.k2
        self.E = np.exp(z)
        self.phi1 = _phi1(z)
        self.phi2 = _phi2(z)
        scheme = cfg.scheme if scheme is None else scheme
        self.scheme = "etd1" if scheme == "em" else scheme
        self.prev_rhs: np.ndarray | None = None
        self._hc = cfg.h.coeffs
        # combined z-forcing profile h - nu A h of the conjugated right side
        self._zforce = cfg.h.coeffs - cfg.nu * g.k2 * cfg.h.coeffs
        self._fc = cfg.f.coeffs

    def rhs(self, u: np.ndarray, z: float) -> np.ndarray:
        raise NotImplementedError

    def advance(self, coeffs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        dt = self.cfg.dt
        if self.scheme == "etd2" and self.prev_rhs is not None:
            out = self.E * coeffs + dt * ((self.phi1 + self.phi2) * rhs - self.phi2 * self.prev_rhs)
        else:
            out = self.E * coeffs + dt * (self.phi1 * rhs)
        if self.scheme == "etd2":
            self.prev_rhs = rhs
        return out

    def _advection(self, w: SpectralField) -> np.ndarray | float:
        if self.cfg.linear_only:
            return 0.0
        return spectral.nonlinear_term(w, w).coeffs


class _DeterministicStepper(_EtdStepper):
    def rhs(self, u: np.ndarray, z: float) -> np.ndarray:
        return self._fc - self._advection(SpectralField(self.cfg.grid, u))


class _ConjugatedStepper(_EtdStepper):
    def rhs(self, v: np.ndarray, z: float) -> np.ndarray:
        w = SpectralField(self.cfg.grid, v + z * self._hc)
        return self._fc + z * self._zforce - self._advection(w)


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with the z -> 0 limit handled to machine accuracy."""
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z)/z^2; series below |z| = 1e-4 to avoid cancellation."""
    out = np.full_like(z, 0.5)
    big = np.abs(z) >= 1e-4
    zb = z[big]
    out[big] = (np.expm1(zb) - zb) / (zb * zb)
    small = ~big & (z != 0.0)
    zs = z[small]
    out[small] = 0.5 + zs / 6.0 + zs * zs / 24.0
    return out


def _check_finite(coeffs: np.ndarray, t: float, last: State) -> None:
    energy = float(np.vdot(coeffs, coeffs).real)
    if not math.isfinite(energy):
        raise BlowupError(f"non-finite coefficients at t={t:.6g}; last valid state at t={last.t:.6g}", last)


def step_deterministic(state: State, cfg: SimConfig, _stepper: _EtdStepper | None = None) -> State:
    """One step of du/dt + nu A u + B(u) = f.

    Stand-alone calls use a fresh stepper (etd2 degrades to its etd1 bootstrap);
    integrate() reuses one stepper so the multistep history is kept.
    """
    st = _stepper if _stepper is not None else _DeterministicStepper(cfg)
    rhs = st.rhs(state.u.coeffs, 0.0)
    new = st.advance(state.u.coeffs, rhs)
    out = State(t=state.t + cfg.dt, u=SpectralField(cfg.grid, new), z=state.z)
    _check_finite(new, out.t, state)
    return out


def step_random(state: State, z_n: float, z_next: float, cfg: SimConfig,
                _stepper: _EtdStepper | None = None) -> State:
    """One pathwise step of the conjugated system, left-endpoint z_n in the forcing.

    With z identically 0 this reproduces step_deterministic exactly (the z
    terms enter as additions of zero arrays).
    """
    st = _stepper if _stepper is not None else _ConjugatedStepper(cfg)
    rhs = st.rhs(state.u.coeffs, z_n)
    new = st.advance(state.u.coeffs, rhs)
    out = State(t=state.t + cfg.dt, u=SpectralField(cfg.grid, new), z=z_next)
    _check_finite(new, out.t, state)
    return out


def step_em_stochastic(state: State, dW: float, cfg: SimConfig,
                       _stepper: _EtdStepper | None = None) -> State:
    """One Euler-Maruyama step of the Ito system with additive noise h dW.

    Drift is the etd1 (exponential Euler) update; the noise increment is added
    after the linear solve.  With h = 0 this is the "em"-scheme deterministic
    step exactly.
    """
    st = _stepper if _stepper is not None else _DeterministicStepper(cfg, scheme="em")
    rhs = st.rhs(state.u.coeffs, 0.0)
    new = st.advance(state.u.coeffs, rhs) + dW * cfg.h.coeffs
    out = State(t=state.t + cfg.dt, u=SpectralField(cfg.grid, new), z=state.z)
    _check_finite(new, out.t, state)
    return out


@dataclass
class IntegrationResult:
    state: State
    series: NormSeries


def _record(series: list, t: float, u: SpectralField, z: float) -> None:
    series.append((t, sobolev_norm(u, 0.0), sobolev_norm(u, 1.0), sobolev_norm(u, 2.0), z))


def integrate(
    v0: SpectralField,
    cfg: SimConfig,
    path: OUPath | WienerPath | None = None,
    steps: int | None = None,
    stride: int | None = None,
    t0: float | None = None,
) -> IntegrationResult:
    """Drive one trajectory and record a NormSeries every stride steps.

    The system is selected by the path type: None integrates the deterministic
    equation (steps required), an OUPath the conjugated random equation, and a
    WienerPath the Ito equation by Euler-Maruyama.  Path dt must match cfg.dt;
    the series always contains floor(steps/stride) + 1 samples, starting at t0.
    """
    if v0.grid != cfg.grid:
        raise ValueError("initial data grid does not match config grid")
    stride = cfg.stride if stride is None else int(stride)

    if path is None:
        if steps is None:
            steps = round(cfg.t_end / cfg.dt)
        start = 0.0 if t0 is None else t0
        stepper: _EtdStepper = _DeterministicStepper(cfg)
        zs = None
        dWs = None
    else:
        if abs(path.dt - cfg.dt) > 1e-12 * max(cfg.dt, path.dt):
            raise ValueError(f"path dt {path.dt} does not match config dt {cfg.dt}")
        if steps is None:
            steps = path.n
        elif steps > path.n:
            raise ValueError(f"path covers {path.n} steps, requested {steps}")
        start = path.t0 if t0 is None else t0
        if isinstance(path, OUPath):
            stepper = _ConjugatedStepper(cfg)
            zs = path.z
            dWs = None
        else:
            # the Ito solver's drift is first order by construction
            stepper = _DeterministicStepper(cfg, scheme="em")
            zs = None
            dWs = path.increments

    state = State(t=start, u=v0.copy(), z=float(zs[0]) if zs is not None else 0.0)
    rows: list = []
    _record(rows, state.t, state.u, state.z)
    for n in range(steps):
        if zs is not None:
            state = step_random(state, float(zs[n]), float(zs[n + 1]), cfg, _stepper=stepper)
        elif dWs is not None:
            state = step_em_stochastic(state, float(dWs[n]), cfg, _stepper=stepper)
        else:
            state = step_deterministic(state, cfg, _stepper=stepper)
        if (n + 1) % stride == 0:
            _record(rows, state.t, state.u, state.z)
    arr = np.array(rows, dtype=np.float64).reshape(-1, 5)
    series = NormSeries(t=arr[:, 0], norm_h=arr[:, 1], norm_h1=arr[:, 2], norm_h2=arr[:, 3], z=arr[:, 4])
    return IntegrationResult(state=state, series=series)


def taylor_green(t: float, nu: float, grid: WaveGrid) -> SpectralField:
    """Decaying Taylor-Green vortex e^{-2 nu t} (cos x sin y, -sin x cos y).

    Exact solution of the unforced equations on the 2*pi torus: the advection
    term is a pure gradient, annihilated by the Leray projection.
    """
    if abs(grid.L - 2.0 * np.pi) > 1e-12:
        raise ValueError(f"Taylor-Green requires L = 2*pi, got L={grid.L}")
    x = grid.x[:, None]
    y = grid.x[None, :]
    amp = math.exp(-2.0 * nu * t)
    vals = np.stack([
        amp * np.cos(x) * np.sin(y),
        -amp * np.sin(x) * np.cos(y),
    ])
    return spectral.to_spectral(spectral.PhysicalField(grid, vals))


def manufactured_forcing(u0: SpectralField, nu: float) -> SpectralField:
    """f = nu A u0 + B(u0, u0), making u0 a steady state of the deterministic system."""
    return SpectralField(
        u0.grid,
        nu * u0.grid.k2 * u0.coeffs + spectral.nonlinear_term(u0, u0).coeffs,
    )
