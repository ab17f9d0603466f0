import numpy as np
import pytest
from scipy.io import wavfile
from scipy.stats import kstest

from melrhy.audio import (CANONICAL_RATE, AudioClip, AudioError, decode,
                          istft, resample, select_clip, stft, stft_complex)
from tests.conftest import make_sine


def _write_wav(path, rate, data):
    wavfile.write(path, rate, data)
    return path


def _zero_crossing_freq(x, sr):
    # interpolated crossing times; interior only (resampler edge ringing)
    x = x[1000:-1000]
    signs = np.signbit(x)
    idx = np.nonzero(signs[1:] != signs[:-1])[0]
    frac = x[idx] / (x[idx] - x[idx + 1])
    times = (idx + frac) / sr
    return (len(times) - 1) / 2 / (times[-1] - times[0])


class TestDecode:
    def test_stereo_44100_halves_length(self, tmp_path):
        t = np.arange(44100) / 44100
        stereo = np.stack([np.sin(2 * np.pi * 220 * t),
                           np.sin(2 * np.pi * 220 * t)], axis=1)
        path = _write_wav(tmp_path / "s.wav", 44100,
                          (stereo * 0.5 * 32767).astype(np.int16))
        clip = decode(path)
        assert clip.sample_rate == CANONICAL_RATE
        assert len(clip.samples) == 22050
        assert np.abs(clip.samples).max() == pytest.approx(1.0)

    def test_silence_is_an_error(self, tmp_path):
        path = _write_wav(tmp_path / "z.wav", 22050, np.zeros(22050, np.int16))
        with pytest.raises(AudioError, match="silent input"):
            decode(path)

    def test_empty_is_an_error(self, tmp_path):
        path = _write_wav(tmp_path / "e.wav", 22050, np.zeros(0, np.int16))
        with pytest.raises(AudioError, match="zero-length"):
            decode(path)

    def test_not_a_wav_is_an_error(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"definitely not RIFF data")
        with pytest.raises(AudioError, match="unsupported|unreadable"):
            decode(path)

    def test_sine_48k_preserves_frequency(self, tmp_path):
        # oracle: count zero crossings of the resampled waveform
        t = np.arange(2 * 48000) / 48000
        path = _write_wav(tmp_path / "f.wav", 48000,
                          (0.8 * np.sin(2 * np.pi * 440 * t)).astype(np.float32))
        clip = decode(path)
        assert clip.sample_rate == CANONICAL_RATE
        measured = _zero_crossing_freq(clip.samples, clip.sample_rate)
        assert abs(measured - 440.0) < 0.1

    def test_24bit_pcm(self, tmp_path):
        # hand-assembled 24-bit PCM WAV
        sr = 22050
        t = np.arange(sr) / sr
        x = 0.5 * np.sin(2 * np.pi * 440 * t)
        ints = (x * (2 ** 23 - 1)).astype(np.int32)
        payload = bytearray()
        for v in ints:
            payload += int(v & 0xFFFFFF).to_bytes(3, "little")
        import struct
        n = len(payload)
        header = (b"RIFF" + struct.pack("<I", 36 + n) + b"WAVE"
                  + b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sr,
                                          sr * 3, 3, 24)
                  + b"data" + struct.pack("<I", n))
        path = tmp_path / "p24.wav"
        path.write_bytes(header + payload)
        clip = decode(path)
        measured = _zero_crossing_freq(clip.samples, clip.sample_rate)
        assert abs(measured - 440.0) < 0.1
        assert np.abs(clip.samples).max() == pytest.approx(1.0)

    def test_float32_and_int16_agree(self, tmp_path):
        t = np.arange(22050) / 22050
        x = 0.5 * np.sin(2 * np.pi * 330 * t)
        p16 = _write_wav(tmp_path / "a.wav", 22050, (x * 32767).astype(np.int16))
        p32 = _write_wav(tmp_path / "b.wav", 22050, x.astype(np.float32))
        c16, c32 = decode(p16), decode(p32)
        assert np.max(np.abs(c16.samples - c32.samples)) < 1e-3


class TestResample:
    def test_identity(self):
        x = np.sin(np.linspace(0, 20, 1000))
        assert np.array_equal(resample(x, 22050, 22050), x)

    def test_length_ratio(self):
        out = resample(np.zeros(48000), 48000, 22050)
        assert len(out) == int(np.ceil(48000 * 22050 / 48000))


class TestSelectClip:
    def test_short_clip_unchanged(self):
        clip = make_sine(220.0, 45.0)
        out = select_clip(clip, seed=1, song_id="x")
        assert out is clip

    def test_deterministic(self):
        clip = make_sine(220.0, 18.0, sr=2000)
        a = select_clip(clip, seed=5, song_id="song")
        b = select_clip(clip, seed=5, song_id="song")
        # same 60 s window? here 18 s <= 60 s so use a long cheap clip instead
        long = AudioClip(samples=np.arange(180 * 50, dtype=np.float64) / 9000.0,
                         sample_rate=50)
        c = select_clip(long, seed=5, song_id="song")
        d = select_clip(long, seed=5, song_id="song")
        assert c.origin_offset == d.origin_offset
        assert np.array_equal(c.samples, d.samples)
        assert len(c.samples) == 60 * 50
        assert a.origin_offset == b.origin_offset

    def test_offsets_uniform_over_range(self):
        # oracle: KS test of 10k seeded starts against U[0, 120].  A fixed
        # instantiation of this check has a 1% false-positive rate by
        # design; this song_id pins a typical draw.
        long = AudioClip(samples=np.ones(180 * 50) * 0.5, sample_rate=50)
        offsets = [select_clip(long, seed=s, song_id="song").origin_offset
                   for s in range(10_000)]
        assert kstest(np.array(offsets) / 120.0, "uniform").pvalue > 0.01

    def test_duration_invariant(self):
        long = AudioClip(samples=np.ones(100 * 50) * 0.3, sample_rate=50)
        out = select_clip(long, seed=0, song_id="d")
        assert out.duration <= 60.5


class TestStft:
    def test_sine_dominant_bin(self):
        # oracle: bin index = round(f * window / sr)
        clip = make_sine(1000.0, 1.0)
        spec = stft(clip)
        expected_bin = round(1000 * 2048 / 22050)
        assert expected_bin == 93
        dominant = np.argmax(spec.mags, axis=1)
        assert np.all(dominant[2:-2] == expected_bin)

    def test_zero_signal_zero_mags(self):
        clip = AudioClip(samples=np.zeros(22050))
        assert np.all(stft(clip).mags == 0.0)

    def test_impulse_train_broadband(self):
        x = np.zeros(22050)
        positions = [3000, 9000, 15000]
        x[positions] = 1.0
        spec = stft(AudioClip(samples=x))
        energy = (spec.mags ** 2).sum(axis=1)
        hot = set(np.argsort(energy)[-12:])
        for p in positions:
            frame = round(p / 512)
            assert any(abs(frame - h) <= 2 for h in hot)

    def test_too_short_is_error(self):
        with pytest.raises(AudioError, match="shorter than one"):
            stft(AudioClip(samples=np.zeros(1000)))

    def test_parseval_bound(self):
        clip = make_sine(523.0, 0.5)
        spec = stft(clip)
        win_energy = np.sum(np.hanning(2048) ** 2)
        bound = win_energy * 2048
        assert np.all((spec.mags ** 2).sum(axis=1) <= bound * (1 + 1e-9))

    def test_frame_times_step(self):
        spec = stft(make_sine(440.0, 1.0))
        steps = np.diff(spec.frame_times)
        assert np.allclose(steps, 512 / 22050)

    def test_istft_roundtrip(self):
        clip = make_sine(330.0, 1.0)
        rebuilt = istft(stft_complex(clip), len(clip.samples))
        assert np.max(np.abs(rebuilt - clip.samples)) < 1e-10
