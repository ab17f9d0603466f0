import numpy as np
import pytest

from melrhy.audio import CANONICAL_RATE, AudioClip


def make_sine(freq: float, seconds: float, sr: int = CANONICAL_RATE,
              amplitude: float = 1.0) -> AudioClip:
    t = np.arange(int(seconds * sr)) / sr
    return AudioClip(samples=amplitude * np.sin(2 * np.pi * freq * t),
                     sample_rate=sr)


def make_noise(seconds: float, seed: int = 0, sr: int = CANONICAL_RATE) -> AudioClip:
    g = np.random.default_rng(seed)
    x = g.normal(size=int(seconds * sr))
    return AudioClip(samples=x / np.abs(x).max(), sample_rate=sr)


def make_clicks(times, seconds: float, seed: int = 0,
                sr: int = CANONICAL_RATE, burst_len: int = 110,
                noise_floor: float = 1e-4) -> AudioClip:
    """Click train over a low dither floor (a recording never has exact
    digital silence; the floor keeps log-flux behavior realistic)."""
    g = np.random.default_rng(seed)
    x = noise_floor * g.normal(size=int(seconds * sr))
    for t in times:
        burst = np.hanning(burst_len) * g.normal(size=burst_len)
        start = int(round(t * sr))
        stop = min(start + burst_len, len(x))
        if start < len(x):
            x[start:stop] += burst[:stop - start]
    peak = np.abs(x).max()
    return AudioClip(samples=x / peak if peak > 0 else x, sample_rate=sr)


@pytest.fixture
def sine_440():
    return make_sine(440.0, 2.0)
