"""melrhy: melodic-interval and rhythmic-ratio distributions from raw audio.

Per-song pipeline: decode -> 1-minute clip -> harmonic/percussive
separation -> {pitch tracking -> interval densities, onset detection ->
ratio densities}, followed by a cross-group statistical battery
(Jensen-Shannon divergence, permutation nulls, diversity indices,
correlation analyses) validated against a synthetic-audio oracle.
"""

__version__ = "0.1.0"

from .audio import AudioClip, Spectrogram, decode, select_clip, stft
from .corpus import (CorpusManifest, DemographicTable, DistanceTable, SongMeta,
                     apply_sampling, load_demographics, load_distances,
                     load_manifest)
from .density import Density, read_density, write_density
from .melody import intervals, melodic_density, midi
from .onsets import OnsetList, detect_onsets, novelty, pick_onsets
from .pipeline import ExtractionRecord, RunConfig, aggregate, extract_all
from .pitch import PitchTrack, track_pitch
from .rhythm import ratios, rhythmic_density
from .separation import StemPair, hpss, load_external_stems
from .stats import (CorrResult, Distribution, DiversityIndex, PairMatrix,
                    PermResult, between_country_null, bh_adjust, corr,
                    country_pairwise_jsd, diversity, jsd, mantel_spearman,
                    partial_region, region_contrast)
from .synth import GroundTruth, SynthSpec, synth_corpus, synth_song
