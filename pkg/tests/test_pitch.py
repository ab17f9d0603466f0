import numpy as np
import pytest

from melrhy.audio import CANONICAL_RATE, AudioClip
from melrhy.pitch import PitchError, track_pitch
from tests.conftest import make_noise, make_sine

SR = CANONICAL_RATE


def _glide_clip(f_start, f_end, seconds):
    n = int(seconds * SR)
    freqs = np.linspace(f_start, f_end, n)
    phase = 2 * np.pi * np.cumsum(freqs) / SR
    return AudioClip(samples=np.sin(phase)), freqs


class TestTrackPitch:
    def test_sine_440_voiced_and_accurate(self, sine_440):
        track = track_pitch(sine_440)
        assert track.voiced.all()
        assert abs(np.median(track.f0_hz[track.voiced]) - 440.0) <= 1.0

    def test_white_noise_mostly_unvoiced(self):
        track = track_pitch(make_noise(2.0, seed=1))
        assert (~track.voiced).mean() >= 0.9

    def test_glide_monotone_and_endpoints(self):
        clip, freqs = _glide_clip(220.0, 440.0, 2.0)
        track = track_pitch(clip)
        # skip 50 ms settle at each edge (window half-width is 46 ms)
        keep = (track.times >= 0.05) & (track.times <= clip.duration - 0.05)
        sel = keep & track.voiced
        f0 = track.f0_hz[sel]
        times = track.times[sel]
        assert sel.sum() > 50
        assert np.all(np.diff(f0) >= -1e-9)
        truth = 220.0 + (440.0 - 220.0) * times / clip.duration
        assert abs(f0[0] - truth[0]) <= 2.0
        assert abs(f0[-1] - truth[-1]) <= 2.0

    def test_octave_sanity_strong_second_harmonic(self):
        t = np.arange(2 * SR) / SR
        x = np.sin(2 * np.pi * 330 * t) + 0.9 * np.sin(2 * np.pi * 660 * t)
        track = track_pitch(AudioClip(samples=x / np.abs(x).max()))
        voiced_f0 = track.f0_hz[track.voiced]
        assert len(voiced_f0) > 0
        in_band = (voiced_f0 >= 320.0) & (voiced_f0 <= 340.0)
        assert in_band.mean() >= 0.95

    def test_time_shift_equivariance(self):
        k = 4  # hops
        base = np.concatenate([np.zeros(SR // 2),
                               np.sin(2 * np.pi * 294 * np.arange(SR) / SR),
                               np.zeros(SR // 2)])
        shifted = np.concatenate([np.zeros(k * 512), base])
        t1 = track_pitch(AudioClip(samples=base))
        t2 = track_pitch(AudioClip(samples=shifted))
        v1, v2 = t1.voiced, t2.voiced
        edge = 8
        inner = slice(edge, len(v1) - edge)
        assert np.array_equal(v1[inner], v2[inner.start + k:len(v1) - edge + k])

    def test_deterministic(self, sine_440):
        a = track_pitch(sine_440)
        b = track_pitch(sine_440)
        assert np.array_equal(a.f0_hz, b.f0_hz, equal_nan=True)
        assert np.array_equal(a.voiced_prob, b.voiced_prob)

    def test_too_short_is_error(self):
        with pytest.raises(PitchError, match="shorter"):
            track_pitch(AudioClip(samples=np.zeros(1024)))

    def test_wrong_rate_is_error(self):
        clip = AudioClip(samples=np.zeros(44100), sample_rate=44100)
        with pytest.raises(PitchError, match="22050"):
            track_pitch(clip)

    def test_track_geometry(self, sine_440):
        track = track_pitch(sine_440)
        steps = np.diff(track.times)
        assert np.allclose(steps, 512 / SR)
        voiced_f0 = track.f0_hz[track.voiced]
        assert np.all((voiced_f0 >= 65.0) & (voiced_f0 <= 2093.0))
        assert np.all((track.voiced_prob >= 0.0) & (track.voiced_prob <= 1.0))
