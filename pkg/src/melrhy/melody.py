"""Pitch tracks to pooled multi-timescale interval samples and densities.

Intervals are lagged MIDI-pitch differences I(t, lag) = m(t) - m(t-lag)
pooled over lags from 100 ms to 2000 ms in 10 ms steps.  Lags snap to
the nearest whole frame; a sample is emitted only when both endpoint
frames are voiced.  Each (t, lag) pair contributes one sample, so
coinciding snapped lags intentionally count multiply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import CANONICAL_RATE, HOP
from .density import (MELODY_GRID_N, MELODY_GRID_START, MELODY_GRID_STEP,
                      MELODY_KIND, Density, DensityError, kde_on_grid)
from .pitch import PitchTrack

LAG_MS = tuple(range(100, 2001, 10))  # 191 lags
KDE_BANDWIDTH = 0.10  # semitones
MIN_SAMPLES = 100


def midi(f_hz: float) -> float:
    """Frequency in Hz to MIDI pitch: 12*log2(f/440) + 69."""
    if f_hz <= 0:
        raise ValueError(f"frequency must be positive, got {f_hz}")
    return 12.0 * np.log2(f_hz / 440.0) + 69.0


@dataclass(frozen=True)
class IntervalSample:
    t: float
    lag: float
    interval: float


class IntervalSamples:
    """Column-oriented interval sample set (cheap for ~10^5 samples)."""

    def __init__(self, t: np.ndarray, lag: np.ndarray, interval: np.ndarray):
        self.t = np.asarray(t, dtype=np.float64)
        self.lag = np.asarray(lag, dtype=np.float64)
        self.interval = np.asarray(interval, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.interval)

    def __iter__(self):
        for t, lag, iv in zip(self.t, self.lag, self.interval):
            yield IntervalSample(t=t, lag=lag, interval=iv)


def intervals(track: PitchTrack) -> IntervalSamples:
    """All voiced lagged interval samples of a pitch track.

    Empty output is legal (fully unvoiced songs).
    """
    frame_step = HOP / CANONICAL_RATE
    voiced = track.voiced
    m = np.full(len(track.f0_hz), np.nan)
    if voiced.any():
        m[voiced] = 12.0 * np.log2(track.f0_hz[voiced] / 440.0) + 69.0
    ts, lags, ivs = [], [], []
    for lag_ms in LAG_MS:
        lag_s = lag_ms / 1000.0
        k = int(round(lag_s / frame_step))
        if k < 1 or k >= len(m):
            continue
        pair_ok = voiced[k:] & voiced[:-k]
        if not pair_ok.any():
            continue
        diff = m[k:][pair_ok] - m[:-k][pair_ok]
        ts.append(track.times[k:][pair_ok])
        lags.append(np.full(len(diff), lag_s))
        ivs.append(diff)
    if not ivs:
        empty = np.empty(0)
        return IntervalSamples(empty, empty, empty)
    return IntervalSamples(np.concatenate(ts), np.concatenate(lags),
                           np.concatenate(ivs))


def melodic_density(samples) -> Density:
    """KDE (bandwidth 0.10 st) of pooled intervals on the fixed grid.

    Kernel mass falling outside +/-24 st is truncated and the density
    renormalized to unit integral over the grid.
    """
    if isinstance(samples, IntervalSamples):
        values = samples.interval
    else:
        values = np.asarray([s.interval for s in samples], dtype=np.float64)
    if len(values) < MIN_SAMPLES:
        raise DensityError(
            f"insufficient voiced material: {len(values)} interval samples "
            f"(need >= {MIN_SAMPLES})")
    raw = kde_on_grid(values, MELODY_GRID_START, MELODY_GRID_STEP,
                      MELODY_GRID_N, KDE_BANDWIDTH)
    mass = raw.sum() * MELODY_GRID_STEP
    if mass <= 0:
        raise DensityError("all interval mass fell outside the grid")
    return Density(kind=MELODY_KIND, density=raw / mass)
