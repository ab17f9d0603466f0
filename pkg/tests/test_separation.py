import numpy as np
import pytest
from scipy.io import wavfile

from melrhy.audio import AudioClip, stft
from melrhy.separation import (SeparationError, hpss, hpss_masks,
                               load_external_stems)
from tests.conftest import make_clicks, make_sine


def _energy(x):
    return float(np.sum(np.asarray(x, dtype=np.float64) ** 2))


def _snr_db(stem, ref):
    return 10 * np.log10(_energy(ref) / _energy(stem - ref))


class TestHpss:
    def test_pure_sine_goes_harmonic(self):
        clip = make_sine(440.0, 3.0)
        stems = hpss(stft(clip), clip)
        total = _energy(stems.vocal_like.samples) + _energy(stems.percussive.samples)
        assert _energy(stems.vocal_like.samples) / total >= 0.9
        assert stems.method == "hpss"

    def test_click_train_goes_percussive(self):
        clip = make_clicks(np.arange(0, 3.0, 0.25), 3.0, seed=2)
        stems = hpss(stft(clip), clip)
        total = _energy(stems.vocal_like.samples) + _energy(stems.percussive.samples)
        assert _energy(stems.percussive.samples) / total >= 0.9

    def test_mixture_separates_6db(self):
        sr = 22050
        t = np.arange(5 * sr) / sr
        sine = 0.4 * np.sin(2 * np.pi * 440 * t)
        clicks = np.zeros(5 * sr)
        g = np.random.default_rng(3)
        for k in np.arange(0, 5.0, 0.5):
            burst = np.hanning(110) * g.normal(size=110) * 0.6
            s = int(k * sr)
            clicks[s:s + 110] += burst
        mix = sine + clicks
        peak = np.abs(mix).max()
        clip = AudioClip(samples=mix / peak)
        stems = hpss(stft(clip), clip)
        assert _snr_db(stems.vocal_like.samples, sine / peak) >= 6.0
        assert _snr_db(stems.percussive.samples, clicks / peak) >= 6.0

    def test_mask_complementarity_and_energy(self):
        clip = make_sine(330.0, 2.0)
        spec = stft(clip)
        mh, mp = hpss_masks(spec.mags)
        assert np.max(np.abs(mh + mp - 1.0)) < 1e-6
        stems = hpss(spec, clip)
        in_energy = _energy(clip.samples)
        out_energy = (_energy(stems.vocal_like.samples)
                      + _energy(stems.percussive.samples))
        assert out_energy <= (1 + 1e-3) * in_energy

    def test_stems_match_input_geometry(self):
        clip = make_sine(500.0, 1.3)
        stems = hpss(stft(clip), clip)
        assert len(stems.vocal_like.samples) == len(clip.samples)
        assert len(stems.percussive.samples) == len(clip.samples)
        assert stems.vocal_like.sample_rate == clip.sample_rate

    def test_deterministic(self):
        clip = make_clicks([0.2, 0.5, 0.9], 1.5, seed=5)
        a = hpss(stft(clip), clip)
        b = hpss(stft(clip), clip)
        assert np.array_equal(a.vocal_like.samples, b.vocal_like.samples)
        assert np.array_equal(a.percussive.samples, b.percussive.samples)

    def test_kernel_too_large(self):
        clip = make_sine(440.0, 0.2)  # few frames
        spec = stft(clip)
        with pytest.raises(SeparationError, match="kernel"):
            hpss_masks(spec.mags, h_kernel=spec.n_frames + 1)


class TestExternalStems:
    def _write_stems(self, root, song_id, v_seconds=2.0, d_seconds=2.0):
        d = root / song_id
        d.mkdir(parents=True)
        sr = 22050
        t = np.arange(int(v_seconds * sr)) / sr
        wavfile.write(d / "vocals.wav", sr,
                      (0.5 * np.sin(2 * np.pi * 220 * t)).astype(np.float32))
        n = int(d_seconds * sr)
        clicks = np.zeros(n)
        clicks[::5000] = 0.8
        wavfile.write(d / "drums.wav", sr, clicks.astype(np.float32))

    def test_both_present(self, tmp_path):
        self._write_stems(tmp_path, "song1")
        pair = load_external_stems("song1", tmp_path)
        assert pair.method == "external"
        assert pair.vocal_like.sample_rate == 22050

    def test_missing_vocals_names_path(self, tmp_path):
        d = tmp_path / "song2"
        d.mkdir()
        wavfile.write(d / "drums.wav", 22050,
                      np.ones(1000, dtype=np.float32) * 0.5)
        with pytest.raises(SeparationError, match="vocals.wav"):
            load_external_stems("song2", tmp_path)

    def test_duration_mismatch(self, tmp_path):
        self._write_stems(tmp_path, "song3", v_seconds=12.0, d_seconds=2.0)
        with pytest.raises(SeparationError, match="duration mismatch"):
            load_external_stems("song3", tmp_path)
