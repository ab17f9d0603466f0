"""Batch extraction, resumable journal, and aggregation.

Per song the pipeline runs decode -> clip -> separate -> {pitch ->
melody, onsets -> rhythm} and persists the two densities in MRD1
containers.  Song failures are isolated as error records; only
run-level problems (unwritable output, bad configuration) abort.

Artifact layout under the output directory:

    densities/<song_id>.melody.mrd     canonical per-song artifacts
    densities/<song_id>.rhythm.mrd
    manifest.csv                       copy of the extraction manifest
    records.csv                        canonical record set (sorted)
    journal.jsonl                      append-only recovery log

The journal carries timings and completion order and is *not* part of
the canonical artifact set; records.csv and the density files are
byte-identical for any worker count, and a resumed run reproduces the
uninterrupted record set exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng
from .audio import AudioClip, AudioError, decode, select_clip, stft
from .corpus import CorpusManifest, SongMeta, load_manifest, write_manifest
from .density import Density, DensityError, read_density, write_density
from .melody import intervals, melodic_density
from .onsets import detect_onsets, write_onsets_csv
from .pitch import PitchError, track_pitch, write_pitch_csv
from .rhythm import ratios, rhythmic_density
from .separation import SeparationError, hpss, load_external_stems
from .stats import Distribution

logger = logging.getLogger(__name__)

_SAFE_ID = re.compile(r"^[A-Za-z0-9._-]+$")
_SONG_ERRORS = (AudioError, DensityError, PitchError, SeparationError,
                FileNotFoundError)


class RunError(RuntimeError):
    """Run-level failure that aborts extraction."""


@dataclass(frozen=True)
class RunConfig:
    manifest_path: str
    out_dir: str
    stems_dir: Optional[str] = None
    workers: int = 1
    seed: int = 0
    dump_pitch: bool = False
    dump_onsets: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise RunError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class ExtractionRecord:
    song_id: str
    status: str  # "ok", "skipped:<reason>", "error:<reason>"
    melody_path: str = ""
    rhythm_path: str = ""
    timings_ms: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _fsync_write(path: Path, writer) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    writer(tmp)
    with open(tmp, "rb") as fh:
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _clip_external(song_id: str, stems_dir: str, seed: int):
    pair = load_external_stems(song_id, stems_dir)
    vocal, perc = pair.vocal_like, pair.percussive
    window = int(round(60.0 * vocal.sample_rate))
    shortest = min(len(vocal.samples), len(perc.samples))
    if shortest > window:
        u = rng.Stream(rng.derive(seed, "clip", song_id)).uniform()
        start = int(u * (shortest - window + 1))
        cut = lambda c: AudioClip(samples=c.samples[start:start + window].copy(),
                                  sample_rate=c.sample_rate,
                                  origin_offset=start / c.sample_rate)
        vocal, perc = cut(vocal), cut(perc)
    return vocal, perc


def extract_one(song_id: str, audio_path: str, out_dir: str, seed: int,
                stems_dir: Optional[str] = None, dump_pitch: bool = False,
                dump_onsets: bool = False) -> ExtractionRecord:
    """Run the full per-song pipeline; never raises for song-level faults."""
    out = Path(out_dir)
    melody_rel = f"densities/{song_id}.melody.mrd"
    rhythm_rel = f"densities/{song_id}.rhythm.mrd"
    timings: dict[str, float] = {}
    try:
        if not _SAFE_ID.match(song_id):
            raise DensityError(f"song_id {song_id!r} is not filesystem-safe")
        t0 = time.perf_counter()
        if stems_dir:
            vocal, perc = _clip_external(song_id, stems_dir, seed)
            timings["decode"] = (time.perf_counter() - t0) * 1e3
            timings["separate"] = 0.0
        else:
            clip = select_clip(decode(audio_path), seed, song_id)
            timings["decode"] = (time.perf_counter() - t0) * 1e3
            t0 = time.perf_counter()
            spec = stft(clip)
            stems = hpss(spec, clip)
            vocal, perc = stems.vocal_like, stems.percussive
            timings["separate"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        track = track_pitch(vocal)
        timings["pitch"] = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        mel = melodic_density(intervals(track))
        timings["melody"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        onset_list = detect_onsets(stft(perc), perc)
        timings["onsets"] = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        rhy = rhythmic_density(ratios(onset_list))
        timings["rhythm"] = (time.perf_counter() - t0) * 1e3

        _fsync_write(out / melody_rel, lambda p: write_density(p, mel))
        _fsync_write(out / rhythm_rel, lambda p: write_density(p, rhy))
        if dump_pitch:
            write_pitch_csv(track, out / "dumps" / f"{song_id}.pitch.csv")
        if dump_onsets:
            write_onsets_csv(onset_list, out / "dumps" / f"{song_id}.onsets.csv")
        return ExtractionRecord(song_id=song_id, status="ok",
                                melody_path=melody_rel, rhythm_path=rhythm_rel,
                                timings_ms=timings)
    except _SONG_ERRORS as exc:
        for rel in (melody_rel, rhythm_rel):
            try:
                (out / rel).unlink(missing_ok=True)
            except OSError:
                pass
        return ExtractionRecord(song_id=song_id, status=f"error:{exc}",
                                timings_ms=timings)


def _worker(args) -> ExtractionRecord:
    return extract_one(*args)


def _read_journal(path: Path) -> dict[str, ExtractionRecord]:
    done: dict[str, ExtractionRecord] = {}
    if not path.exists():
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn tail write from an interrupted run
            done[row["song_id"]] = ExtractionRecord(
                song_id=row["song_id"], status=row["status"],
                melody_path=row.get("melody_path", ""),
                rhythm_path=row.get("rhythm_path", ""),
                timings_ms=row.get("timings_ms", {}))
    return done


def _journal_line(fh, record: ExtractionRecord) -> None:
    fh.write(json.dumps({
        "song_id": record.song_id, "status": record.status,
        "melody_path": record.melody_path, "rhythm_path": record.rhythm_path,
        "timings_ms": record.timings_ms,
    }, sort_keys=True) + "\n")
    fh.flush()
    os.fsync(fh.fileno())


def write_records_csv(records: list[ExtractionRecord], path: Path) -> None:
    """Canonical record set: sorted, no timing fields."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["song_id", "status", "melody_path", "rhythm_path"])
        for r in sorted(records, key=lambda r: r.song_id):
            writer.writerow([r.song_id, r.status, r.melody_path, r.rhythm_path])


def extract_all(config: RunConfig) -> list[ExtractionRecord]:
    """Extract every manifest song, resuming from the journal if present."""
    manifest = load_manifest(config.manifest_path, seed=config.seed)
    out = Path(config.out_dir)
    try:
        (out / "densities").mkdir(parents=True, exist_ok=True)
        if config.dump_pitch or config.dump_onsets:
            (out / "dumps").mkdir(exist_ok=True)
    except OSError as exc:
        raise RunError(f"cannot create output directory: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise RunError(f"output directory not writable: {out}")
    write_manifest(manifest, out / "manifest.csv")

    journal_path = out / "journal.jsonl"
    done = _read_journal(journal_path)

    records: list[ExtractionRecord] = []
    todo: list[SongMeta] = []
    for song in manifest.songs:
        prev = done.get(song.song_id)
        if prev is not None and prev.ok and \
                (out / prev.melody_path).exists() and \
                (out / prev.rhythm_path).exists():
            records.append(prev)
        else:
            todo.append(song)

    if records:
        logger.info("journal: reusing %d completed songs", len(records))

    args = [(s.song_id, s.audio_path, str(out), config.seed, config.stems_dir,
             config.dump_pitch, config.dump_onsets) for s in todo]
    with open(journal_path, "a") as journal:
        if config.workers == 1:
            for a in args:
                record = _worker(a)
                _journal_line(journal, record)
                records.append(record)
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_worker, a) for a in args]
                for fut in as_completed(futures):
                    record = fut.result()
                    _journal_line(journal, record)
                    records.append(record)

    write_records_csv(records, out / "records.csv")
    n_ok = sum(1 for r in records if r.ok)
    logger.info("extracted %d/%d songs ok", n_ok, len(records))
    return sorted(records, key=lambda r: r.song_id)


# ---------------------------------------------------------------------------
# density loading / aggregation
# ---------------------------------------------------------------------------

def densities_root(path) -> Path:
    """Accept either an extraction output dir or a bare densities dir."""
    p = Path(path)
    return p / "densities" if (p / "densities").is_dir() else p


def load_song_densities(path, kind: str) -> dict[str, Density]:
    """All `<song_id>.<kind>.mrd` files under an extraction output."""
    root = densities_root(path)
    out: dict[str, Density] = {}
    for f in sorted(root.glob(f"*.{kind}.mrd")):
        song_id = f.name[:-len(f".{kind}.mrd")]
        out[song_id] = read_density(f)
    return out


def manifest_for(path) -> CorpusManifest:
    p = Path(path)
    candidates = [p / "manifest.csv", p.parent / "manifest.csv"]
    for c in candidates:
        if c.exists():
            return load_manifest(c)
    raise RunError(f"no manifest.csv found near {path}")


def mean_density(group: list[Density]) -> Density:
    """Uniform-weight mean; normalization is preserved by linearity."""
    if not group:
        raise DensityError("empty group")
    kind = group[0].kind
    stack = np.stack([d.density for d in group])
    return Density(kind=kind, density=stack.mean(axis=0))


def aggregate(path, by: str = "all",
              manifest: Optional[CorpusManifest] = None) -> dict[str, dict[str, Density]]:
    """Mean density per group, for both kinds; group key -> kind -> Density."""
    if by not in ("all", "country", "region"):
        raise RunError(f"unknown grouping {by!r}")
    if by != "all" and manifest is None:
        manifest = manifest_for(path)
    groups: dict[str, dict[str, list[Density]]] = {}
    for kind in ("melody", "rhythm"):
        songs = load_song_densities(path, kind)
        if by == "all":
            labels = {sid: "all" for sid in songs}
        else:
            attr = {s.song_id: (s.country if by == "country" else s.region)
                    for s in manifest.songs}
            labels = {sid: attr[sid] for sid in songs if sid in attr}
        for sid, dens in songs.items():
            label = labels.get(sid)
            if label is None:
                continue
            groups.setdefault(label, {}).setdefault(kind, []).append(dens)
    out: dict[str, dict[str, Density]] = {}
    for label in sorted(groups):
        out[label] = {kind: mean_density(ds)
                      for kind, ds in sorted(groups[label].items())}
    if not out:
        raise RunError(f"no densities found under {path}")
    return out


def country_distributions(path, kind: str) -> tuple[dict[str, Distribution], dict[str, str]]:
    """Country mean Distributions plus country -> region, from one run."""
    manifest = manifest_for(path)
    songs = load_song_densities(path, kind)
    by_country: dict[str, list[Density]] = {}
    regions: dict[str, str] = {}
    for s in manifest.songs:
        if s.song_id in songs:
            by_country.setdefault(s.country, []).append(songs[s.song_id])
            regions[s.country] = s.region
    profiles = {c: Distribution.from_density(mean_density(ds))
                for c, ds in sorted(by_country.items())}
    return profiles, regions


def song_distributions(path, kind: str) -> list[tuple[str, Distribution]]:
    """(country, Distribution) per extracted song, manifest-labelled."""
    manifest = manifest_for(path)
    songs = load_song_densities(path, kind)
    return [(s.country, Distribution.from_density(songs[s.song_id]))
            for s in manifest.songs if s.song_id in songs]
