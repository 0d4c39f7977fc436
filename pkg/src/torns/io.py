"""Configuration parsing, checkpoints, CSV series and run manifests.

Formats:

* config -- JSON (documented schema below, see load_config);
* norm series -- CSV with header t,norm_H,norm_H1,norm_H2,z; floats are
  written with repr (shortest round-trip), so identical runs give
  byte-identical files;
* checkpoint -- little-endian binary: magic "TRNS", u32 version, u32 N,
  f64 L, f64 nu, f64 t, f64 z, u64 payload byte length, then the coefficient
  payload as interleaved re/im f64 pairs, component-major, row-major mode
  order (exactly 2 * N * N complex values);
* manifest -- JSON listing every emitted file with its sha256 (written last;
  the only artifact containing wall-clock data).
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import SimConfig, State, NormSeries, taylor_green, manufactured_forcing
from .spectral import SpectralField, WaveGrid, leray_project, make_grid, random_divfree_field

__all__ = [
    "ConfigError",
    "CheckpointHeader",
    "load_config",
    "load_config_file",
    "normalize_config",
    "config_defaults",
    "write_checkpoint",
    "read_checkpoint",
    "peek_checkpoint",
    "write_series_csv",
    "read_series_csv",
    "write_rows_csv",
    "write_path_csv",
    "emit_plot_script",
    "write_manifest",
]

CHECKPOINT_MAGIC = b"TRNS"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sII d d d d Q")  # magic, version, N, L, nu, t, z, payload bytes


class ConfigError(ValueError):
    """Schema violation; message starts with the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


_DEFAULTS = {
    "L": 2.0 * math.pi,
    "scheme": "etd2",
    "seed": 0,
    "stride": 10,
    "t_end": 1.0,
    "forcing": {"preset": "zero"},
    "noise": {"preset": "zero"},
    "initial": {"preset": "zero"},
}

_PRESETS = {
    # f = 0, h = 0, L = 2*pi, Taylor-Green initial data
    "taylor-green": {
        "nu": 0.1, "L": 2.0 * math.pi, "N": 16, "dt": 1e-3, "t_end": 1.0,
        "forcing": {"preset": "zero"}, "noise": {"preset": "zero"},
        "initial": {"preset": "taylor-green"},
    },
    # moderate noisy run with admissible h
    "decay-noise": {
        "nu": 1.0, "L": 2.0 * math.pi, "N": 32, "dt": 1e-3, "t_end": 1.0,
        "forcing": {"preset": "zero"},
        "noise": {"preset": "random", "norm": 0.5, "seed": 11},
        "initial": {"preset": "random", "norm": 1.0, "seed": 5},
    },
}


def config_defaults(preset: str | None = None) -> dict:
    """The raw config dict for a named preset (or the bare defaults)."""
    base = dict(_DEFAULTS)
    if preset is not None:
        if preset not in _PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r} (have {sorted(_PRESETS)})")
        base.update(_PRESETS[preset])
    return base


def _require(raw: dict, field: str, types, check=None, msg: str = ""):
    if field not in raw:
        raise ConfigError(field, "missing required field")
    v = raw[field]
    if not isinstance(v, types) or isinstance(v, bool):
        raise ConfigError(field, f"expected {types}, got {type(v).__name__}")
    if check is not None and not check(v):
        raise ConfigError(field, msg or "invalid value")
    return v


def _field_from_modes(grid: WaveGrid, modes: list, path: str) -> SpectralField:
    """Sparse mode list -> Hermitian-symmetrized, Leray-projected field.

    Each entry: {"j": [jx, jy], "u": [re, im], "v": [re, im]} giving the
    coefficients of both velocity components at lattice mode j.  The conjugate
    is added at -j, so the physical field is real.
    """
    N = grid.N
    coeffs = np.zeros((2, N, N), dtype=np.complex128)
    for i, entry in enumerate(modes):
        here = f"{path}[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(here, "mode entries must be objects")
        j = entry.get("j")
        if (not isinstance(j, list) or len(j) != 2
                or not all(isinstance(a, int) and not isinstance(a, bool) for a in j)):
            raise ConfigError(f"{here}.j", "expected a pair of integers")
        jx, jy = j
        half = N // 2
        if not (-half < jx <= half and -half < jy <= half):
            raise ConfigError(f"{here}.j", f"mode {j} outside the lattice for N={N}")
        for comp, key in ((0, "u"), (1, "v")):
            val = entry.get(key, [0.0, 0.0])
            if not isinstance(val, list) or len(val) != 2:
                raise ConfigError(f"{here}.{key}", "expected [re, im]")
            c = complex(float(val[0]), float(val[1]))
            coeffs[comp, jx % N, jy % N] += 0.5 * c
            coeffs[comp, (-jx) % N, (-jy) % N] += 0.5 * c.conjugate()
    return leray_project(SpectralField(grid, coeffs))


def _build_field(grid: WaveGrid, spec: dict, path: str, nu: float | None = None) -> SpectralField:
    if not isinstance(spec, dict):
        raise ConfigError(path, "expected an object")
    if "modes" in spec:
        return _field_from_modes(grid, _require(spec, "modes", list), f"{path}.modes")
    preset = spec.get("preset", "zero")
    if preset == "zero":
        return SpectralField.zero(grid)
    if preset == "random":
        norm = float(spec.get("norm", 1.0))
        seed = int(spec.get("seed", 0))
        return random_divfree_field(grid, seed, norm=norm)
    if preset == "taylor-green":
        if nu is None:
            raise ConfigError(path, "taylor-green preset is only valid for initial data")
        return taylor_green(0.0, nu, grid)
    if preset == "manufactured":
        if nu is None:
            raise ConfigError(path, "manufactured preset is only valid for forcing")
        u0 = random_divfree_field(grid, int(spec.get("seed", 0)), norm=float(spec.get("norm", 1.0)))
        return manufactured_forcing(u0, nu)
    raise ConfigError(f"{path}.preset", f"unknown preset {preset!r}")


def normalize_config(raw: dict | str) -> dict:
    """Merged config dict: preset applied and defaults filled.

    Normalization is idempotent, so the dict echoed into a manifest reloads
    to the identical SimConfig (same seeds, same coefficients).
    """
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {"nu", "L", "N", "dt", "scheme", "seed", "stride", "t_end",
             "preset", "forcing", "noise", "initial"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown field")
    merged = config_defaults(raw.get("preset"))
    merged.update({k: v for k, v in raw.items() if k != "preset"})
    return merged


def load_config(raw: dict | str) -> SimConfig:
    """Validated SimConfig from a JSON string or dict.

    Schema (top-level): nu > 0, L > 0, N even >= 4, dt > 0, and optionally
    scheme, seed, stride, t_end, preset, forcing, noise, initial.  A top-level
    "preset" fills unset keys ("taylor-green", "decay-noise").  forcing/noise/
    initial are {"preset": ...} or {"modes": [...]} objects (see
    _field_from_modes).  The admissibility report is evaluated and attached;
    violation is a warning carried in the report, not a rejection.
    """
    merged = normalize_config(raw)

    nu = _require(merged, "nu", (int, float), lambda v: v > 0, "must be positive")
    L = _require(merged, "L", (int, float), lambda v: v > 0, "must be positive")
    N = _require(merged, "N", int, lambda v: v >= 4 and v % 2 == 0, "must be even and >= 4")
    dt = _require(merged, "dt", (int, float), lambda v: v > 0, "must be positive")
    scheme = _require(merged, "scheme", str)
    seed = _require(merged, "seed", int)
    stride = _require(merged, "stride", int, lambda v: v >= 1, "must be >= 1")
    t_end = _require(merged, "t_end", (int, float), lambda v: v > 0, "must be positive")

    grid = make_grid(float(L), N)
    f = _build_field(grid, merged["forcing"], "forcing", nu=float(nu))
    h = _build_field(grid, merged["noise"], "noise")
    u0 = _build_field(grid, merged["initial"], "initial", nu=float(nu))
    try:
        return SimConfig(nu=float(nu), grid=grid, dt=float(dt), f=f, h=h,
                         scheme=scheme, seed=seed, stride=stride, t_end=float(t_end), u0=u0)
    except ValueError as exc:
        raise ConfigError("<config>", str(exc)) from exc


def load_config_file(path: str | Path) -> SimConfig:
    return load_config(Path(path).read_text())


class CheckpointHeader:
    """Decoded checkpoint header (see module docstring for the layout)."""

    def __init__(self, magic: bytes, version: int, N: int, L: float, nu: float,
                 t: float, z: float, payload_len: int):
        self.magic = magic
        self.version = version
        self.N = N
        self.L = L
        self.nu = nu
        self.t = t
        self.z = z
        self.payload_len = payload_len


def write_checkpoint(state: State, path: str | Path, nu: float = 0.0) -> None:
    """Bit-exact binary dump of a State (coefficients as interleaved re/im f64)."""
    g = state.u.grid
    c = np.ascontiguousarray(state.u.coeffs, dtype=np.complex128)
    payload = c.view(np.float64).tobytes()
    header = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, g.N, g.L, nu,
                          state.t, state.z, len(payload))
    Path(path).write_bytes(header + payload)


def peek_checkpoint(path: str | Path) -> CheckpointHeader:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, N, L, nu, t, z, plen = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: version mismatch: file has {version}, expected {CHECKPOINT_VERSION}")
    return CheckpointHeader(magic, version, N, L, nu, t, z, plen)


def read_checkpoint(path: str | Path) -> State:
    """Inverse of write_checkpoint (viscosity is retrievable via peek_checkpoint)."""
    hdr = peek_checkpoint(path)
    data = Path(path).read_bytes()
    payload = data[_HEADER.size:]
    expected = 2 * hdr.N * hdr.N * 16
    if hdr.payload_len != expected or len(payload) != hdr.payload_len:
        raise ValueError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    coeffs = np.frombuffer(payload, dtype=np.float64).view(np.complex128).reshape(2, hdr.N, hdr.N)
    grid = make_grid(hdr.L, hdr.N)
    return State(t=hdr.t, u=SpectralField(grid, coeffs.copy()), z=hdr.z)


def _fmt(x) -> str:
    """Shortest round-trip text for a float (deterministic across runs)."""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_series_csv(series: NormSeries, path: str | Path) -> None:
    """Norm series as CSV: t,norm_H,norm_H1,norm_H2,z (header always present)."""
    lines = ["t,norm_H,norm_H1,norm_H2,z"]
    for i in range(len(series)):
        lines.append(",".join(_fmt(float(v)) for v in
                              (series.t[i], series.norm_h[i], series.norm_h1[i],
                               series.norm_h2[i], series.z[i])))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path: str | Path) -> NormSeries:
    rows = Path(path).read_text().strip().splitlines()
    if rows[0] != "t,norm_H,norm_H1,norm_H2,z":
        raise ValueError(f"{path}: unexpected header {rows[0]!r}")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]], dtype=np.float64)
    data = data.reshape(-1, 5)
    return NormSeries(t=data[:, 0], norm_h=data[:, 1], norm_h1=data[:, 2],
                      norm_h2=data[:, 3], z=data[:, 4])


def write_rows_csv(rows: list[dict], columns: list[str], path: str | Path) -> None:
    """Report rows as CSV with a fixed column order (missing keys -> empty)."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c, "")) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def write_path_csv(ou, path: str | Path) -> None:
    """Noise path as CSV: t, dW, z; dW on row k is the increment arriving at t_k
    (first row carries 0.0 by convention)."""
    t = ou.times()
    dW = np.concatenate([[0.0], ou.wiener.increments])
    lines = ["t,dW,z"]
    for i in range(len(t)):
        lines.append(f"{_fmt(float(t[i]))},{_fmt(float(dW[i]))},{_fmt(float(ou.z[i]))}")
    Path(path).write_text("\n".join(lines) + "\n")


_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Self-contained plot script; reads the CSVs written next to it."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
CSVS = {csvs!r}

fig, ax = plt.subplots(figsize=(8.0, 5.0), dpi=100)
for name in CSVS:
    with open(HERE / name, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        continue
    cols = rows[0].keys()
    xkey = "t" if "t" in cols else list(cols)[0]
    for key in cols:
        if key == xkey or key == "error":
            continue
        try:
            xs = [float(r[xkey]) for r in rows]
            ys = [float(r[key]) for r in rows]
        except ValueError:
            continue
        ax.plot(xs, ys, label=f"{{name}}:{{key}}")
ax.set_xlabel("t")
ax.legend(fontsize=6)
fig.tight_layout()
fig.savefig(HERE / "{out_png}")
print("wrote", HERE / "{out_png}")
'''


def emit_plot_script(csv_names: list[str], path: str | Path, out_png: str = "plot.png") -> None:
    """Write a stand-alone matplotlib script referencing only the given CSVs."""
    Path(path).write_text(_PLOT_TEMPLATE.format(csvs=list(csv_names), out_png=out_png))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: str | Path, config_echo: dict, seeds: list[int],
                   files: list[str], command: str = "") -> Path:
    """Run manifest (written last): config echo, seeds, version, checksums."""
    out_dir = Path(out_dir)
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "wall_clock_unix": time.time(),
        "config": config_echo,
        "seeds": list(seeds),
        "files": {
            name: {"sha256": _sha256(out_dir / name), "bytes": (out_dir / name).stat().st_size}
            for name in sorted(files)
        },
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
