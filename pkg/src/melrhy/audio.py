"""Audio decoding, clip selection, and the shared STFT substrate.

Everything downstream (separation, pitch, onsets) operates on mono
22050 Hz clips and on Hann-windowed 2048/512 spectrograms produced
here, so bin and frame geometry is consistent across the pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, get_window, resample_poly

from . import rng

CANONICAL_RATE = 22050
WINDOW_SIZE = 2048
HOP = 512
CLIP_SECONDS = 60.0


class AudioError(ValueError):
    """Unreadable, unsupported, or degenerate audio input."""


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM buffer; the unit all DSP operations work on."""

    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE
    origin_offset: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise AudioError("samples must be a 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise AudioError("samples contain non-finite values")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude STFT, frames x bins, with the geometry that produced it."""

    mags: np.ndarray
    frame_hop: int = HOP
    window_size: int = WINDOW_SIZE
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        expected_bins = self.window_size // 2 + 1
        if self.mags.ndim != 2 or self.mags.shape[1] != expected_bins:
            raise AudioError(
                f"expected {expected_bins} bins for window {self.window_size}, "
                f"got shape {self.mags.shape}"
            )
        if not np.all(np.isfinite(self.mags)) or np.any(self.mags < 0):
            raise AudioError("magnitudes must be finite and nonnegative")

    @property
    def n_frames(self) -> int:
        return self.mags.shape[0]

    @property
    def frame_times(self) -> np.ndarray:
        return np.arange(self.n_frames) * (self.frame_hop / self.sample_rate)


def _to_float_mono(data: np.ndarray) -> np.ndarray:
    if data.ndim == 2:
        data = data.astype(np.float64).mean(axis=1)
    else:
        data = data.astype(np.float64)
    return data


_INT_SCALE = {np.dtype(np.int16): 2.0**15, np.dtype(np.int32): 2.0**31,
              np.dtype(np.uint8): 2.0**7}


def resample(x: np.ndarray, rate_in: int, rate_out: int = CANONICAL_RATE) -> np.ndarray:
    """Rational-rate polyphase resampling with a windowed-sinc filter.

    64 taps per phase, Kaiser beta = 8.6; cutoff at the lower of the
    two Nyquist rates.  Identity when rates match.
    """
    if rate_in == rate_out:
        return np.asarray(x, dtype=np.float64)
    g = math.gcd(rate_in, rate_out)
    up, down = rate_out // g, rate_in // g
    max_rate = max(up, down)
    half_len = 32 * max_rate  # 64 taps per polyphase branch
    taps = firwin(2 * half_len + 1, 1.0 / max_rate, window=("kaiser", 8.6))
    return resample_poly(np.asarray(x, dtype=np.float64), up, down, window=taps * up)


def decode(path) -> AudioClip:
    """Decode a PCM WAV file to mono 22050 Hz, peak-normalized.

    Channels are averaged, the windowed-sinc resampler brings the rate
    to canonical, and the result is scaled to max |sample| = 1.
    Raises AudioError for unsupported codecs, empty files, or silence.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises bare ValueError for bad codecs
        raise AudioError(f"unsupported or unreadable audio: {path}: {exc}") from exc
    if data.size == 0:
        raise AudioError(f"zero-length audio: {path}")
    scale = _INT_SCALE.get(data.dtype)
    mono = _to_float_mono(data)
    if scale is not None:
        mono = mono / scale
        if data.dtype == np.dtype(np.uint8):
            mono -= 1.0
    samples = resample(mono, rate, CANONICAL_RATE)
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak <= 0.0:
        raise AudioError(f"silent input: {path}")
    return AudioClip(samples=samples / peak, sample_rate=CANONICAL_RATE)


def select_clip(clip: AudioClip, seed: int, song_id: str) -> AudioClip:
    """Select the 1-minute analysis window.

    Clips no longer than 60 s pass through; otherwise the start offset
    is drawn uniformly from [0, duration - 60] on the (seed, song_id)
    substream, so the window is reproducible per song.
    """
    window = int(round(CLIP_SECONDS * clip.sample_rate))
    if len(clip.samples) <= window:
        return clip
    max_start = len(clip.samples) - window
    u = rng.Stream(rng.derive(seed, "clip", song_id)).uniform()
    start = int(u * (max_start + 1))
    return AudioClip(
        samples=clip.samples[start:start + window].copy(),
        sample_rate=clip.sample_rate,
        origin_offset=clip.origin_offset + start / clip.sample_rate,
    )


def _hann(window_size: int) -> np.ndarray:
    return get_window("hann", window_size, fftbins=True)


def frame_signal(x: np.ndarray, window_size: int, hop: int) -> np.ndarray:
    """Frame a reflection-padded signal; frame i is centered at i*hop."""
    pad = window_size // 2
    padded = np.pad(x, (pad, pad), mode="reflect")
    n_frames = 1 + (len(padded) - window_size) // hop
    idx = np.arange(window_size)[None, :] + hop * np.arange(n_frames)[:, None]
    return padded[idx]


def stft_complex(clip: AudioClip, window_size: int = WINDOW_SIZE,
                 hop: int = HOP) -> np.ndarray:
    """Complex one-sided STFT (frames x bins) used for reconstruction."""
    if window_size & (window_size - 1):
        raise AudioError(f"window_size must be a power of two, got {window_size}")
    if hop > window_size:
        raise AudioError(f"hop {hop} exceeds window {window_size}")
    if len(clip.samples) < window_size:
        raise AudioError("clip shorter than one analysis window")
    frames = frame_signal(clip.samples, window_size, hop)
    return np.fft.rfft(frames * _hann(window_size)[None, :], axis=1)


def stft(clip: AudioClip, window_size: int = WINDOW_SIZE, hop: int = HOP) -> Spectrogram:
    """Hann-windowed magnitude STFT at the module default geometry."""
    mags = np.abs(stft_complex(clip, window_size, hop))
    return Spectrogram(mags=mags, frame_hop=hop, window_size=window_size,
                       sample_rate=clip.sample_rate)


def istft(spec_complex: np.ndarray, n_samples: int, window_size: int = WINDOW_SIZE,
          hop: int = HOP) -> np.ndarray:
    """Overlap-add inverse of `stft_complex`, trimmed to n_samples.

    Uses the Hann window for both analysis and synthesis with
    squared-window normalization, which reconstructs unmodified input
    exactly for hop <= window/2.
    """
    win = _hann(window_size)
    frames = np.fft.irfft(spec_complex, n=window_size, axis=1) * win[None, :]
    pad = window_size // 2
    total = pad * 2 + n_samples
    out = np.zeros(total + window_size)
    norm = np.zeros(total + window_size)
    win_sq = win * win
    for i in range(frames.shape[0]):
        start = i * hop
        out[start:start + window_size] += frames[i]
        norm[start:start + window_size] += win_sq
    valid = norm > 1e-12
    out[valid] /= norm[valid]
    return out[pad:pad + n_samples]
