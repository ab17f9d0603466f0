"""Layout contract between the stem-preparation bridge and the core.

Runs only when the external neural separator is actually installed;
the full acceptance suite never depends on it.
"""

import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

from melrhy.separation import load_external_stems

STEMPREP = Path(__file__).resolve().parents[1] / "stemprep" / "stemprep.py"

pytestmark = pytest.mark.skipif(
    shutil.which("demucs") is None,
    reason="external separator not installed; HPSS path covers acceptance")


def test_stemprep_output_loads(tmp_path):
    sr = 44100
    audio = tmp_path / "audio"
    audio.mkdir()
    t = np.arange(8 * sr) / sr
    mix = 0.4 * np.sin(2 * np.pi * 220 * t)
    mix[::sr // 2] += 0.8
    for sid in ("c1", "c2"):
        wavfile.write(audio / f"{sid}.wav", sr, mix.astype(np.float32))
    rows = ["song_id,country,region,audio_path,chart_countries"]
    for sid in ("c1", "c2"):
        rows.append(f"{sid},AA,R,{audio / (sid + '.wav')},AA")
    manifest = tmp_path / "m.csv"
    manifest.write_text("\n".join(rows) + "\n")

    out = tmp_path / "stems"
    proc = subprocess.run(
        [sys.executable, str(STEMPREP), "--manifest", str(manifest),
         "--out", str(out), "--model", "mdx_q"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr

    for sid in ("c1", "c2"):
        pair = load_external_stems(sid, out)
        assert pair.method == "external"
        assert pair.vocal_like.sample_rate == 22050
