"""Harmonic/percussive stem splitting.

The built-in separator is median-filter HPSS (Fitzgerald-style): the
harmonic component is enhanced by a median filter along time, the
percussive component by one along frequency, and power-2 soft masks
partition the complex STFT before inverse transform.  When externally
pre-separated stems exist on disk, `load_external_stems` ingests them
instead and records the method so analyses can be stratified.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import median_filter

from .audio import AudioClip, Spectrogram, decode, istft, stft_complex

DEFAULT_KERNEL = 31


class SeparationError(ValueError):
    """Invalid separation configuration or missing stem inputs."""


@dataclass(frozen=True)
class StemPair:
    vocal_like: AudioClip
    percussive: AudioClip
    method: str  # "hpss" or "external"


def hpss_masks(mags: np.ndarray, h_kernel: int = DEFAULT_KERNEL,
               p_kernel: int = DEFAULT_KERNEL) -> tuple[np.ndarray, np.ndarray]:
    """Soft (power-2) harmonic and percussive masks for a magnitude STFT.

    mags is frames x bins.  The masks sum to 1 at every cell; cells
    where both median responses vanish are split evenly.
    """
    n_frames, n_bins = mags.shape
    if h_kernel > n_frames:
        raise SeparationError(
            f"harmonic kernel {h_kernel} exceeds {n_frames} frames")
    if p_kernel > n_bins:
        raise SeparationError(
            f"percussive kernel {p_kernel} exceeds {n_bins} bins")
    harm = median_filter(mags, size=(h_kernel, 1), mode="reflect")
    perc = median_filter(mags, size=(1, p_kernel), mode="reflect")
    h2 = harm * harm
    p2 = perc * perc
    total = h2 + p2
    dead = total <= 0.0
    total[dead] = 1.0
    mask_h = np.where(dead, 0.5, h2 / total)
    return mask_h, 1.0 - mask_h


def hpss(spec: Spectrogram, clip: AudioClip, h_kernel: int = DEFAULT_KERNEL,
         p_kernel: int = DEFAULT_KERNEL) -> StemPair:
    """Split a clip into harmonic (vocal-like) and percussive stems.

    spec must be the magnitude STFT of clip at module defaults; the
    complex STFT is recomputed here so the stored phase reconstructs
    both stems at the clip's exact length.
    """
    mask_h, mask_p = hpss_masks(spec.mags, h_kernel, p_kernel)
    cstft = stft_complex(clip, spec.window_size, spec.frame_hop)
    if cstft.shape != spec.mags.shape:
        raise SeparationError("spectrogram does not match clip geometry")
    n = len(clip.samples)
    vocal = istft(cstft * mask_h, n, spec.window_size, spec.frame_hop)
    perc = istft(cstft * mask_p, n, spec.window_size, spec.frame_hop)
    mk = lambda x: AudioClip(samples=x, sample_rate=clip.sample_rate,
                             origin_offset=clip.origin_offset)
    return StemPair(vocal_like=mk(vocal), percussive=mk(perc), method="hpss")


def load_external_stems(song_id: str, stems_dir) -> StemPair:
    """Load `<stems_dir>/<song_id>/{vocals,drums}.wav` as a StemPair.

    Stems are decoded through the standard audio path (mono, canonical
    rate, peak-normalized).  Durations more than 0.5 s apart are
    rejected as a mispaired or truncated export.
    """
    base = Path(stems_dir) / str(song_id)
    vocals_path = base / "vocals.wav"
    drums_path = base / "drums.wav"
    for p in (vocals_path, drums_path):
        if not p.exists():
            raise SeparationError(f"missing stem file: {p}")
    vocals = decode(vocals_path)
    drums = decode(drums_path)
    if abs(vocals.duration - drums.duration) > 0.5:
        raise SeparationError(
            f"stem duration mismatch for {song_id}: "
            f"vocals {vocals.duration:.2f}s vs drums {drums.duration:.2f}s")
    return StemPair(vocal_like=vocals, percussive=drums, method="external")
