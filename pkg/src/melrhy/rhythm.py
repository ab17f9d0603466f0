"""Onset lists to tempo-invariant ratio samples and densities.

Every consecutive onset triplet (t1, t2, t3) yields
r = (t2-t1) / (t3-t1); triplets overlap with stride 1.  Ratios outside
the open interval (0.15, 0.85) are discarded as detector glitches or
grace notes, and the per-song density is a bandwidth-0.005 Gaussian KDE
on the [0, 1] grid, zeroed outside the kept support and renormalized to
sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import (RHYTHM_GRID_N, RHYTHM_GRID_START, RHYTHM_GRID_STEP,
                      RHYTHM_KIND, Density, DensityError, kde_on_grid)
from .onsets import OnsetList

RATIO_LO = 0.15
RATIO_HI = 0.85
KDE_BANDWIDTH = 0.005
MIN_SAMPLES = 30

# grid indices at the exclusion bounds (0.15/step and 0.85/step)
_LO_IDX = round(RATIO_LO / RHYTHM_GRID_STEP)
_HI_IDX = round(RATIO_HI / RHYTHM_GRID_STEP)


@dataclass(frozen=True)
class RatioSample:
    r: float
    t1: float


def ratios(onsets: OnsetList) -> list[RatioSample]:
    """Inter-onset ratios for all overlapping triplets, filtered."""
    t = np.asarray(onsets.times, dtype=np.float64)
    if len(t) < 3:
        raise DensityError(f"insufficient onsets: {len(t)} (need >= 3)")
    ioi1 = t[1:-1] - t[:-2]
    ioi2 = t[2:] - t[1:-1]
    r = ioi1 / (ioi1 + ioi2)
    keep = (r > RATIO_LO) & (r < RATIO_HI)
    return [RatioSample(r=float(rv), t1=float(anchor))
            for rv, anchor in zip(r[keep], t[:-2][keep])]


def rhythmic_density(samples) -> Density:
    """KDE (bandwidth 0.005) of ratio samples, sum-normalized.

    Grid points at or outside the exclusion bounds carry zero mass.
    """
    values = np.asarray([s.r for s in samples], dtype=np.float64)
    if len(values) < MIN_SAMPLES:
        raise DensityError(
            f"insufficient onsets: {len(values)} ratio samples "
            f"(need >= {MIN_SAMPLES})")
    raw = kde_on_grid(values, RHYTHM_GRID_START, RHYTHM_GRID_STEP,
                      RHYTHM_GRID_N, KDE_BANDWIDTH)
    raw[:_LO_IDX + 1] = 0.0
    raw[_HI_IDX:] = 0.0
    mass = raw.sum()
    if mass <= 0:
        raise DensityError("all ratio mass fell outside the kept support")
    return Density(kind=RHYTHM_KIND, density=raw / mass)
