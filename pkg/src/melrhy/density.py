"""Fixed-grid kernel density estimation and the MRD1 density container.

Melodic densities live on a semitone grid from -24 to +24 (step 0.05,
961 points) and are normalized so sum(density) * step = 1.  Rhythmic
densities live on [0, 1] (step 0.001, 1001 points) with plain sum
normalization, matching how their source analyses report them.  The
normalization mode is stored in the file header so consumers can
always recover a discrete probability vector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MELODY_KIND = "melody"
RHYTHM_KIND = "rhythm"

MELODY_GRID_START = -24.0
MELODY_GRID_STEP = 0.05
MELODY_GRID_N = 961

RHYTHM_GRID_START = 0.0
RHYTHM_GRID_STEP = 0.001
RHYTHM_GRID_N = 1001

NORM_INTEGRAL = "integral"  # sum(density) * step = 1
NORM_SUM = "sum"            # sum(density) = 1

_MAGIC = b"MRD1"
_KIND_CODE = {MELODY_KIND: 1, RHYTHM_KIND: 2}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}
_NORM_CODE = {NORM_INTEGRAL: 1, NORM_SUM: 2}
_NORM_NAME = {v: k for k, v in _NORM_CODE.items()}
_HEADER = struct.Struct("<4sBBddI")


class DensityError(ValueError):
    pass


def grid_spec(kind: str) -> tuple[float, float, int]:
    if kind == MELODY_KIND:
        return MELODY_GRID_START, MELODY_GRID_STEP, MELODY_GRID_N
    if kind == RHYTHM_KIND:
        return RHYTHM_GRID_START, RHYTHM_GRID_STEP, RHYTHM_GRID_N
    raise DensityError(f"unknown density kind: {kind}")


def grid_points(kind: str) -> np.ndarray:
    start, step, n = grid_spec(kind)
    return start + step * np.arange(n)


def norm_mode(kind: str) -> str:
    return NORM_INTEGRAL if kind == MELODY_KIND else NORM_SUM


@dataclass(frozen=True)
class Density:
    """One per-song (or aggregated) density on its kind's fixed grid."""

    kind: str
    density: np.ndarray

    def __post_init__(self):
        start, step, n = grid_spec(self.kind)
        if len(self.density) != n:
            raise DensityError(
                f"{self.kind} density must have {n} points, got {len(self.density)}")
        if not np.all(np.isfinite(self.density)) or np.any(self.density < 0):
            raise DensityError("density must be finite and nonnegative")
        total = self.density.sum() * (step if norm_mode(self.kind) == NORM_INTEGRAL else 1.0)
        if abs(total - 1.0) > 1e-9:
            raise DensityError(f"density not normalized: mass {total!r}")

    @property
    def grid(self) -> np.ndarray:
        return grid_points(self.kind)

    def probs(self) -> np.ndarray:
        """Discrete probability vector on the grid (sums to 1)."""
        p = self.density.copy()
        return p / p.sum()


def kde_on_grid(values: np.ndarray, start: float, step: float, n: int,
                bandwidth: float) -> np.ndarray:
    """Gaussian KDE evaluated on a uniform grid via linear binning.

    Samples are linearly split between neighboring cells of a grid
    extended by the kernel's 5-sigma reach, then convolved with the
    sampled kernel; direct convolution keeps the result deterministic.
    Output is proportional to sum_i K((g - x_i) / bandwidth); callers
    normalize.
    """
    values = np.asarray(values, dtype=np.float64)
    reach = int(np.ceil(5.0 * bandwidth / step))
    ext_n = n + 2 * reach
    pos = (values - start) / step + reach
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    weights = np.zeros(ext_n)
    keep_lo = (lo >= 0) & (lo < ext_n)
    keep_hi = (lo + 1 >= 0) & (lo + 1 < ext_n)
    weights += np.bincount(lo[keep_lo], weights=(1.0 - frac)[keep_lo],
                           minlength=ext_n)[:ext_n]
    weights += np.bincount((lo + 1)[keep_hi], weights=frac[keep_hi],
                           minlength=ext_n)[:ext_n]
    offsets = np.arange(-reach, reach + 1) * step / bandwidth
    kernel = np.exp(-0.5 * offsets * offsets)
    smoothed = np.convolve(weights, kernel, mode="same")
    return smoothed[reach:reach + n]


def write_density(path, dens: Density) -> None:
    start, step, n = grid_spec(dens.kind)
    header = _HEADER.pack(_MAGIC, _KIND_CODE[dens.kind],
                          _NORM_CODE[norm_mode(dens.kind)], start, step, n)
    payload = np.ascontiguousarray(dens.density, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_density(path) -> Density:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:4] != _MAGIC:
        raise DensityError(f"not an MRD1 density file: {path}")
    magic, kind_code, norm_code, start, step, n = _HEADER.unpack_from(raw)
    kind = _KIND_NAME.get(kind_code)
    if kind is None or _NORM_NAME.get(norm_code) != norm_mode(kind):
        raise DensityError(f"unsupported MRD1 header in {path}")
    g_start, g_step, g_n = grid_spec(kind)
    if n != g_n or abs(start - g_start) > 1e-12 or abs(step - g_step) > 1e-12:
        raise DensityError(f"grid geometry mismatch in {path}")
    if len(raw) < _HEADER.size + 8 * n:
        raise DensityError(f"truncated MRD1 payload in {path}")
    values = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEADER.size)
    return Density(kind=kind, density=values.astype(np.float64))


def write_density_csv(path, dens: Density) -> None:
    """CSV export with full float round-trip precision."""
    grid = dens.grid
    with open(path, "w") as fh:
        fh.write("grid,density\n")
        for g, d in zip(grid, dens.density):
            fh.write(f"{float(g)!r},{float(d)!r}\n")


def read_density_csv(path, kind: str) -> Density:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "grid,density":
            raise DensityError(f"unexpected density CSV header: {header}")
        for line in fh:
            line = line.strip()
            if line:
                rows.append(float(line.split(",")[1]))
    return Density(kind=kind, density=np.array(rows))
