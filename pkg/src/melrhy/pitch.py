"""Fundamental-frequency tracking with voicing decisions.

Per frame, the YIN cumulative-mean-normalized difference function is
evaluated exactly over a half-window correlation span, its troughs
become pitch candidates weighted by a Beta(2,18) prior over absolute
thresholds, and a Viterbi pass over log-spaced pitch states plus one
unvoiced state smooths the trajectory.  Candidate lags are refined by
parabolic interpolation, so reported f0 is not quantized to the
decoding bins.

The voiced->voiced transition uses an *unnormalized* Gaussian log-cost
over bin distance.  Row-normalizing would spread mass over hundreds of
bins and make small pitch moves costlier than hopping through the
unvoiced state, which produces voicing flicker; with the unnormalized
cost a sub-semitone move is nearly free and only large jumps pay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .audio import CANONICAL_RATE, HOP, WINDOW_SIZE, AudioClip

FMIN_DEFAULT = 65.0
FMAX_DEFAULT = 2093.0
SWITCH_PROB = 0.01          # voiced <-> unvoiced per frame
TRANSITION_SEMITONES = 1.0  # Gaussian width of pitch moves per frame
BINS_PER_SEMITONE = 5
N_THRESHOLDS = 100
BETA_A, BETA_B = 2.0, 18.0
VOICED_PROB_FLOOR = 0.5     # frames below this are unvoiced downstream


class PitchError(ValueError):
    pass


@dataclass(frozen=True)
class PitchTrack:
    """Frame-aligned f0 trajectory; unvoiced frames carry NaN."""

    times: np.ndarray
    f0_hz: np.ndarray
    voiced_prob: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.f0_hz) == len(self.voiced_prob)):
            raise PitchError("track arrays must share length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise PitchError("times must be strictly increasing")

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0_hz)


def _difference_function(frames: np.ndarray, corr_window: int, offset: int,
                         tau_max: int) -> np.ndarray:
    """Exact YIN difference function d(tau) for tau in [0, tau_max].

    d(tau) = sum_j (x_{o+j} - x_{o+j+tau})^2 over j < W with
    W = corr_window and o = offset.  Offsetting the correlation window
    into the frame interior keeps the effective analysis center near
    the frame center (bias only tau/2 samples), which matters for
    glides.  Expands into sliding energies plus an FFT
    cross-correlation.
    """
    n_frames, frame_len = frames.shape
    if offset + corr_window + tau_max > frame_len:
        raise PitchError("correlation window exceeds the frame")
    fft_len = 1
    while fft_len < frame_len + corr_window:
        fft_len *= 2
    spec_full = np.fft.rfft(frames, n=fft_len, axis=1)
    head = frames[:, offset:offset + corr_window]
    spec_head = np.fft.rfft(head, n=fft_len, axis=1)
    xcorr_all = np.fft.irfft(spec_full * np.conj(spec_head), n=fft_len, axis=1)
    taus = np.arange(tau_max + 1)
    xcorr = xcorr_all[:, offset + taus]
    energy = np.concatenate(
        [np.zeros((n_frames, 1)), np.cumsum(frames * frames, axis=1)], axis=1)
    head_energy = energy[:, offset + corr_window] - energy[:, offset]
    shifted_energy = (energy[:, offset + taus + corr_window]
                      - energy[:, offset + taus])
    d = head_energy[:, None] + shifted_energy - 2.0 * xcorr
    return np.maximum(d, 0.0)


def _cmndf(d: np.ndarray) -> np.ndarray:
    """Cumulative-mean-normalized difference, rows = frames."""
    out = np.ones_like(d)
    taus = np.arange(1, d.shape[1])
    cum = np.cumsum(d[:, 1:], axis=1)
    safe = np.where(cum > 0, cum, 1.0)
    out[:, 1:] = np.where(cum > 0, d[:, 1:] * taus[None, :] / safe, 1.0)
    return out


def _parabolic_refine(values: np.ndarray, idx: int) -> float:
    if idx <= 0 or idx >= len(values) - 1:
        return float(idx)
    a, b, c = values[idx - 1], values[idx], values[idx + 1]
    denom = a - 2.0 * b + c
    if denom <= 0:
        return float(idx)
    shift = 0.5 * (a - c) / denom
    return idx + float(np.clip(shift, -0.5, 0.5))


def _threshold_prior() -> tuple[np.ndarray, np.ndarray]:
    """Discrete Beta(2,18) prior over N_THRESHOLDS absolute thresholds."""
    edges = np.linspace(0.0, 1.0, N_THRESHOLDS + 1)
    cdf = betainc(BETA_A, BETA_B, edges)
    return edges[1:], np.diff(cdf)


_THRESHOLDS, _THRESHOLD_W = _threshold_prior()
_THRESHOLD_CUMW = np.concatenate([[0.0], np.cumsum(_THRESHOLD_W)])


def _prior_mass_below(x: float) -> float:
    """Total prior mass of thresholds t <= x."""
    return float(_THRESHOLD_CUMW[np.searchsorted(_THRESHOLDS, x, side="right")])


def _frame_candidates(cm_row: np.ndarray, tau_min: int, tau_max: int,
                      sr: int, fmin: float, fmax: float):
    """Pitch candidates (f0, prob) for one CMNDF row.

    Troughs are scanned in ascending lag; the trough claimed by
    threshold t is the first one below t, so trough i collects the
    prior mass of thresholds in (v_i, min_{j<i} v_j].
    """
    seg = cm_row[tau_min:tau_max + 1]
    interior = (seg[1:-1] < seg[:-2]) & (seg[1:-1] <= seg[2:])
    trough_taus = np.nonzero(interior)[0] + tau_min + 1
    cands = []
    best_before = 1.0  # thresholds live in (0, 1]
    for tau in trough_taus:
        v = cm_row[tau]
        if v < best_before:
            mass = _prior_mass_below(best_before) - _prior_mass_below(v)
            if mass > 0.0:
                tau_ref = _parabolic_refine(cm_row, int(tau))
                f0 = sr / tau_ref if tau_ref > 0 else 0.0
                if fmin <= f0 <= fmax:
                    cands.append((f0, mass))
            best_before = v
    return cands


def _viterbi(obs_voiced: np.ndarray, obs_unvoiced: np.ndarray,
             band: int, penalty: np.ndarray, switch_prob: float) -> np.ndarray:
    """Decode voiced-bin/unvoiced state path; returns state indices."""
    n_frames, n_bins = obs_voiced.shape
    unvoiced = n_bins
    log_stay_v = np.log1p(-switch_prob)
    log_switch = np.log(switch_prob)
    log_stay_u = np.log1p(-switch_prob)

    dp = np.empty((n_frames, n_bins + 1))
    bp = np.zeros((n_frames, n_bins + 1), dtype=np.int32)
    dp[0, :n_bins] = obs_voiced[0] + np.log(0.5)
    dp[0, unvoiced] = obs_unvoiced[0] + np.log(0.5)

    trans = log_stay_v + penalty  # (2*band+1,), peak at center
    pad = np.full(band, -np.inf)
    offsets = np.arange(-band, band + 1)
    for t in range(1, n_frames):
        prev_v = dp[t - 1, :n_bins]
        prev_u = dp[t - 1, unvoiced]

        windows = np.lib.stride_tricks.sliding_window_view(
            np.concatenate([pad, prev_v, pad]), 2 * band + 1)
        scored = windows + trans[None, :]
        arg = np.argmax(scored, axis=1)
        best_v = scored[np.arange(n_bins), arg]
        src_v = np.arange(n_bins) + offsets[arg]

        from_u = prev_u + log_switch
        take_u = from_u > best_v
        dp[t, :n_bins] = obs_voiced[t] + np.where(take_u, from_u, best_v)
        bp[t, :n_bins] = np.where(take_u, unvoiced, src_v)

        best_prev_v = int(np.argmax(prev_v))
        from_v = prev_v[best_prev_v] + log_switch
        stay_u = prev_u + log_stay_u
        if from_v > stay_u:
            dp[t, unvoiced] = obs_unvoiced[t] + from_v
            bp[t, unvoiced] = best_prev_v
        else:
            dp[t, unvoiced] = obs_unvoiced[t] + stay_u
            bp[t, unvoiced] = unvoiced

    path = np.empty(n_frames, dtype=np.int32)
    path[-1] = int(np.argmax(dp[-1]))
    for t in range(n_frames - 2, -1, -1):
        path[t] = bp[t + 1, path[t + 1]]
    return path


def track_pitch(clip: AudioClip, fmin: float = FMIN_DEFAULT,
                fmax: float = FMAX_DEFAULT,
                switch_prob: float = SWITCH_PROB,
                transition_semitones: float = TRANSITION_SEMITONES) -> PitchTrack:
    """Estimate the f0 trajectory of a mono clip at canonical geometry.

    Frames follow the shared STFT layout (window 2048, hop 512,
    reflection padding), so pitch frames align with spectrogram frames.
    """
    if clip.sample_rate != CANONICAL_RATE:
        raise PitchError(f"expected {CANONICAL_RATE} Hz input, "
                         f"got {clip.sample_rate}")
    if len(clip.samples) < WINDOW_SIZE:
        raise PitchError("clip shorter than one analysis window")
    sr = clip.sample_rate
    # YIN-style framing: frame i starts at i*hop, no padding, so every
    # frame sees real signal; reported times are frame centers.
    x = clip.samples
    n_frames = 1 + (len(x) - WINDOW_SIZE) // HOP
    idx = np.arange(WINDOW_SIZE)[None, :] + HOP * np.arange(n_frames)[:, None]
    frames = x[idx]
    corr_window = WINDOW_SIZE // 2
    offset = (WINDOW_SIZE - corr_window) // 2
    tau_min = max(2, int(np.floor(sr / fmax)))
    tau_max = min(offset - 1, int(np.ceil(sr / fmin)))
    if tau_max <= tau_min:
        raise PitchError("fmin/fmax band leaves no usable lag range")

    d = _difference_function(frames, corr_window, offset, tau_max)
    cm = _cmndf(d)

    candidates = [
        _frame_candidates(cm[t], tau_min, tau_max, sr, fmin, fmax)
        for t in range(n_frames)
    ]

    semitones_span = 12.0 * np.log2(fmax / fmin)
    n_bins = int(np.ceil(semitones_span * BINS_PER_SEMITONE)) + 1
    log2_fmin = np.log2(fmin)
    bin_step = np.log2(fmax / fmin) / (n_bins - 1)  # octaves per bin

    obs_voiced = np.full((n_frames, n_bins), -np.inf)
    obs_unvoiced = np.empty(n_frames)
    voiced_prob = np.zeros(n_frames)
    with np.errstate(divide="ignore"):
        for t, cands in enumerate(candidates):
            total = 0.0
            for f0, mass in cands:
                b = int(round((np.log2(f0) - log2_fmin) / bin_step))
                b = min(max(b, 0), n_bins - 1)
                obs_voiced[t, b] = np.logaddexp(obs_voiced[t, b], np.log(mass))
                total += mass
            voiced_prob[t] = min(total, 1.0)
            obs_unvoiced[t] = np.log(max(1.0 - total, 1e-12))

    sigma_bins = transition_semitones * BINS_PER_SEMITONE
    band = int(np.ceil(4 * sigma_bins))
    offs = np.arange(-band, band + 1)
    penalty = -0.5 * (offs / sigma_bins) ** 2

    path = _viterbi(obs_voiced, obs_unvoiced, band, penalty, switch_prob)

    f0 = np.full(n_frames, np.nan)
    for t in range(n_frames):
        state = path[t]
        if state >= n_bins or voiced_prob[t] < VOICED_PROB_FLOOR:
            continue
        bin_log2 = log2_fmin + state * bin_step
        cands = candidates[t]
        if cands:
            logs = np.log2([f for f, _ in cands])
            f0[t] = cands[int(np.argmin(np.abs(logs - bin_log2)))][0]
        else:
            f0[t] = 2.0 ** bin_log2
    times = (np.arange(n_frames) * HOP + WINDOW_SIZE // 2) / sr
    return PitchTrack(times=times, f0_hz=f0, voiced_prob=voiced_prob)


def write_pitch_csv(track: PitchTrack, path) -> None:
    """Debug dump: one `time,f0,voiced_prob` row per frame."""
    with open(path, "w") as fh:
        fh.write("time,f0,voiced_prob\n")
        for t, f, v in zip(track.times, track.f0_hz, track.voiced_prob):
            f_txt = "" if np.isnan(f) else f"{f:.6f}"
            fh.write(f"{t:.6f},{f_txt},{v:.6f}\n")
