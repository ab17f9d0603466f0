"""Synthetic corpora with known interval and ratio ground truth.

A synth song layers a sine melody (random walk over a weighted interval
set, reflected one octave either side of the base pitch) over a click
train whose successive inter-onset pairs realize weighted ratio draws.
The generator returns the realized samples alongside the audio, so
end-to-end checks compare the analyzers against truth the analyzers
never touched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import rng
from .audio import CANONICAL_RATE, AudioClip
from .corpus import MANIFEST_COLUMNS
from .melody import midi

CLICK_SECONDS = 0.005
FADE_SECONDS = 0.010
LAYER_RMS = 0.1
REFLECT_SEMITONES = 12.0


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    melody_intervals: tuple[tuple[float, float], ...]  # (semitones, weight)
    rhythm_ratios: tuple[tuple[float, float], ...]     # (ratio, weight)
    note_dur: float = 1.0
    base_ioi: float = 0.3
    f0_base: float = 220.0
    duration: float = 30.0
    seed: int = 0

    def __post_init__(self):
        for name, pairs in (("melody_intervals", self.melody_intervals),
                            ("rhythm_ratios", self.rhythm_ratios)):
            if not pairs:
                raise SynthError(f"{name} is empty")
            weights = [w for _, w in pairs]
            if any(w < 0 for w in weights) or sum(weights) <= 0:
                raise SynthError(f"{name} weights must be >= 0 with positive sum")
        for r, _ in self.rhythm_ratios:
            if not 0.15 < r < 0.85:
                raise SynthError(f"ratio {r} outside the analyzable band (0.15, 0.85)")
        if not 65.0 <= self.f0_base <= 2093.0:
            raise SynthError(f"f0_base {self.f0_base} outside the pitch-track band")
        if self.note_dur <= 0 or self.base_ioi <= 0 or self.duration <= 0:
            raise SynthError("durations must be positive")


@dataclass(frozen=True)
class GroundTruth:
    intervals: tuple[float, ...]   # realized per-note steps, semitones
    ratios: tuple[float, ...]      # drawn within-pair ratios
    onset_times: tuple[float, ...]
    note_times: tuple[float, ...]


def _weighted_draw(pairs, stream: rng.Stream) -> float:
    weights = np.asarray([w for _, w in pairs], dtype=np.float64)
    cdf = np.cumsum(weights) / weights.sum()
    idx = int(np.searchsorted(cdf, stream.uniform(), side="right"))
    return pairs[min(idx, len(pairs) - 1)][0]


def _reflect(value: float, lo: float, hi: float) -> float:
    while value > hi or value < lo:
        if value > hi:
            value = 2.0 * hi - value
        else:
            value = 2.0 * lo - value
    return value


def _melody_layer(spec: SynthSpec, sr: int, n_samples: int):
    stream = rng.Stream(rng.derive(spec.seed, "melody"))
    base = midi(spec.f0_base)
    lo, hi = base - REFLECT_SEMITONES, base + REFLECT_SEMITONES
    n_notes = int(np.ceil(spec.duration / spec.note_dur))
    pitches = [base]
    steps = []
    for _ in range(n_notes - 1):
        drawn = _weighted_draw(spec.melody_intervals, stream)
        nxt = _reflect(pitches[-1] + drawn, lo, hi)
        steps.append(nxt - pitches[-1])
        pitches.append(nxt)

    note_len = int(round(spec.note_dur * sr))
    fade = int(round(FADE_SECONDS * sr))
    env = np.ones(note_len)
    if fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
        env[:fade] = ramp
        env[-fade:] = ramp[::-1]
    out = np.zeros(n_samples)
    note_times = []
    for i, m in enumerate(pitches):
        start = i * note_len
        if start >= n_samples:
            break
        note_times.append(start / sr)
        freq = 440.0 * 2.0 ** ((m - 69.0) / 12.0)
        length = min(note_len, n_samples - start)
        t = np.arange(length) / sr
        out[start:start + length] = np.sin(2 * np.pi * freq * t) * env[:length]
    return out, tuple(steps), tuple(note_times)


def _click(stream: rng.Stream, sr: int) -> np.ndarray:
    n = max(4, int(round(CLICK_SECONDS * sr)))
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / (n - 1))
    return stream.normals(n) * window


def _rhythm_layer(spec: SynthSpec, sr: int, n_samples: int):
    stream = rng.Stream(rng.derive(spec.seed, "rhythm"))
    click_stream = rng.Stream(rng.derive(spec.seed, "clicks"))
    cycle = 2.0 * spec.base_ioi
    t = 0.0
    onsets = [0.0]
    drawn = []
    while True:
        r = _weighted_draw(spec.rhythm_ratios, stream)
        t1 = t + r * cycle
        t2 = t + cycle
        if t2 >= spec.duration:
            break
        drawn.append(r)
        onsets.extend((t1, t2))
        t = t2
    out = np.zeros(n_samples)
    for onset in onsets:
        start = int(round(onset * sr))
        burst = _click(click_stream, sr)
        stop = min(start + len(burst), n_samples)
        if start < n_samples:
            out[start:stop] += burst[:stop - start]
    return out, tuple(drawn), tuple(onsets)


def synth_song(spec: SynthSpec) -> tuple[AudioClip, GroundTruth]:
    """Render one synthetic song and its ground-truth sample lists."""
    sr = CANONICAL_RATE
    n_samples = int(round(spec.duration * sr))
    vocal, steps, note_times = _melody_layer(spec, sr, n_samples)
    perc, drawn, onsets = _rhythm_layer(spec, sr, n_samples)

    def to_rms(x: np.ndarray) -> np.ndarray:
        level = np.sqrt(np.mean(x * x))
        return x * (LAYER_RMS / level) if level > 0 else x

    mix = to_rms(vocal) + to_rms(perc)
    peak = np.max(np.abs(mix))
    if peak > 0:
        mix = mix * (0.9 / peak)
    clip = AudioClip(samples=mix, sample_rate=sr)
    return clip, GroundTruth(intervals=steps, ratios=drawn,
                             onset_times=onsets, note_times=note_times)


def synth_corpus(country_specs: dict[str, SynthSpec], n_per_country: int,
                 out_dir, seed: int = 0,
                 regions: dict[str, str] | None = None) -> Path:
    """Write a WAV corpus plus manifest in the corpus-module schema.

    Per-song seeds derive from (corpus seed, country, index), so the
    corpus regenerates bit-identically for a fixed seed.
    """
    if n_per_country < 1:
        raise SynthError("n_per_country must be positive")
    out = Path(out_dir)
    audio_dir = out / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.csv"
    rows = []
    for country in sorted(country_specs):
        base_spec = country_specs[country]
        region = (regions or {}).get(country, "synth")
        for i in range(n_per_country):
            song_id = f"{country}-{i:04d}"
            song_spec = replace(base_spec, seed=rng.derive(seed, country, i))
            clip, _ = synth_song(song_spec)
            wav_path = audio_dir / f"{song_id}.wav"
            wavfile.write(wav_path, clip.sample_rate,
                          clip.samples.astype(np.float32))
            rows.append([song_id, country, region, str(wav_path), country])
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    return manifest_path
