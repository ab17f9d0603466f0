#!/usr/bin/env python3
"""Batch bridge to an external neural source separator.

Runs the separator (Demucs v4 command line by default) over every song
in a manifest and rewrites its vocals/drums outputs as mono 22050 Hz
WAV files in the layout the extraction pipeline's external-stem mode
expects:

    <out>/<song_id>/vocals.wav
    <out>/<song_id>/drums.wav

Usage:
    python stemprep.py --manifest manifest.csv --out stems/ --model mdx_q

The separator binary must be on PATH (pip install demucs).  Songs whose
stems already exist are skipped, so interrupted runs can simply be
rerun.  Per-song failures are logged and counted but never abort the
batch.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, resample_poly

logger = logging.getLogger("stemprep")

TARGET_RATE = 22050
STEM_NAMES = ("vocals", "drums")


@dataclass(frozen=True)
class StemJob:
    song_id: str
    audio_path: Path
    out_dir: Path

    @property
    def stem_paths(self) -> dict[str, Path]:
        return {name: self.out_dir / self.song_id / f"{name}.wav"
                for name in STEM_NAMES}

    @property
    def done(self) -> bool:
        return all(p.exists() for p in self.stem_paths.values())


@dataclass
class Summary:
    ok: int = 0
    skipped: int = 0
    failed: int = 0

    def __str__(self) -> str:
        return f"{self.ok} ok, {self.skipped} skipped, {self.failed} failed"


def read_manifest(path) -> list[tuple[str, str]]:
    """(song_id, audio_path) rows; needs only those two columns."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                not {"song_id", "audio_path"} <= set(reader.fieldnames):
            raise SystemExit(f"error: {path} lacks song_id/audio_path columns")
        for row in reader:
            rows.append((row["song_id"].strip(), row["audio_path"].strip()))
    if not rows:
        raise SystemExit(f"error: empty manifest {path}")
    return rows


def to_mono_22050(rate: int, data: np.ndarray) -> np.ndarray:
    """Average channels and resample with a windowed-sinc polyphase FIR."""
    x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if data.dtype == np.int16:
        x /= 2.0 ** 15
    elif data.dtype == np.int32:
        x /= 2.0 ** 31
    if rate != TARGET_RATE:
        g = math.gcd(rate, TARGET_RATE)
        up, down = TARGET_RATE // g, rate // g
        max_rate = max(up, down)
        half_len = 32 * max_rate
        taps = firwin(2 * half_len + 1, 1.0 / max_rate, window=("kaiser", 8.6))
        x = resample_poly(x, up, down, window=taps * up)
    return x.astype(np.float32)


def run_separator(separator: str, model: str, audio_path: Path,
                  work_dir: Path) -> Path:
    """Invoke the separator CLI; returns the directory holding the stems."""
    cmd = [separator, "-n", model, "-o", str(work_dir), str(audio_path)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"separator failed ({proc.returncode}): "
                           f"{proc.stderr.strip()[:500]}")
    track_dir = work_dir / model / audio_path.stem
    if not track_dir.is_dir():
        raise RuntimeError(f"separator produced no output at {track_dir}")
    return track_dir


def process_job(job: StemJob, separator: str, model: str) -> None:
    with tempfile.TemporaryDirectory(prefix="stemprep-") as td:
        track_dir = run_separator(separator, model, job.audio_path, Path(td))
        for name, dest in job.stem_paths.items():
            src = track_dir / f"{name}.wav"
            if not src.exists():
                raise RuntimeError(f"separator wrote no {name} stem")
            rate, data = wavfile.read(src)
            mono = to_mono_22050(rate, data)
            dest.parent.mkdir(parents=True, exist_ok=True)
            wavfile.write(dest, TARGET_RATE, mono)


def run_jobs(manifest_path, out_dir, model: str = "mdx_q",
             separator: str = "demucs") -> Summary:
    """Separate every manifest song into the external-stem layout.

    Existing stems are skipped; per-song failures are logged and
    counted, never fatal.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = Summary()
    for song_id, audio_path in read_manifest(manifest_path):
        job = StemJob(song_id=song_id, audio_path=Path(audio_path),
                      out_dir=out)
        if job.done:
            logger.info("%s: stems exist, skipping", song_id)
            summary.skipped += 1
            continue
        try:
            process_job(job, separator, model)
            summary.ok += 1
        except (RuntimeError, OSError, ValueError) as exc:
            logger.error("%s: %s", song_id, exc)
            summary.failed += 1
    return summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Write vocals/drums stems for every manifest song.")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--model", default="mdx_q")
    parser.add_argument("--separator", default="demucs",
                        help="separator executable (default: demucs)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")

    if shutil.which(args.separator) is None:
        print(f"error: separator {args.separator!r} not found on PATH; "
              f"install it with: pip install demucs", file=sys.stderr)
        return 2

    summary = run_jobs(args.manifest, args.out, model=args.model,
                       separator=args.separator)
    print(f"stemprep: {summary}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
