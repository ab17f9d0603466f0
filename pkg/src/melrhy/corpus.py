"""Corpus metadata ingestion and the chart-sampling rules.

A manifest row describes one song: identifier, home country, region
label, audio path, and the set of countries it charted in.  Sampling
keeps country-exclusive songs only, caps each country at 1500 by seeded
uniform subsampling, and drops countries with fewer than 50 songs.
Demographic and pairwise-distance tables are plain CSV sidecars.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional

from . import rng

logger = logging.getLogger(__name__)

MAX_PER_COUNTRY = 1500
MIN_PER_COUNTRY = 50

MANIFEST_COLUMNS = ["song_id", "country", "region", "audio_path", "chart_countries"]
DEMOGRAPHICS_COLUMNS = ["country", "ethnic", "linguistic", "religious", "genetic"]
DISTANCE_COLUMNS = ["country_a", "country_b", "distance"]

FRACTIONALIZATION_FACTORS = ("ethnic", "linguistic", "religious")
DEMOGRAPHIC_FACTORS = FRACTIONALIZATION_FACTORS + ("genetic",)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class SongMeta:
    song_id: str
    country: str
    region: str
    audio_path: str
    chart_countries: frozenset[str]

    def __post_init__(self):
        if self.country not in self.chart_countries:
            raise CorpusError(
                f"song {self.song_id}: country {self.country} not in its "
                f"chart countries {sorted(self.chart_countries)}")

    @property
    def exclusive(self) -> bool:
        return len(self.chart_countries) == 1


@dataclass(frozen=True)
class CorpusManifest:
    songs: tuple[SongMeta, ...]
    seed: int = 0

    def by_country(self) -> dict[str, list[SongMeta]]:
        out: dict[str, list[SongMeta]] = {}
        for song in self.songs:
            out.setdefault(song.country, []).append(song)
        return out

    def countries(self) -> list[str]:
        return sorted({s.country for s in self.songs})


@dataclass(frozen=True)
class DemographicTable:
    """country -> factor -> fraction in [0, 1]; missing values are absent."""

    values: dict[str, dict[str, float]]
    unmatched: frozenset[str] = field(default_factory=frozenset)

    def get(self, country: str, factor: str) -> Optional[float]:
        return self.values.get(country, {}).get(factor)


@dataclass(frozen=True)
class DistanceTable:
    """Symmetric nonnegative country-pair distances, zero diagonal."""

    values: dict[frozenset, float]
    countries: frozenset[str]
    unmatched: frozenset[str] = field(default_factory=frozenset)

    def get(self, a: str, b: str) -> Optional[float]:
        if a == b:
            return 0.0
        return self.values.get(frozenset((a, b)))


def _check_header(reader: csv.DictReader, expected: list[str], path) -> None:
    names = reader.fieldnames
    if names is None:
        raise CorpusError(f"empty file: {path}")
    if list(names) != expected:
        unknown = [c for c in names if c not in expected]
        missing = [c for c in expected if c not in names]
        raise CorpusError(
            f"{path}: bad header (unknown columns {unknown}, missing {missing})")


def load_manifest(path, seed: int = 0) -> CorpusManifest:
    """Parse a manifest CSV; malformed rows raise rather than skip."""
    songs: list[SongMeta] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, MANIFEST_COLUMNS, path)
        for lineno, row in enumerate(reader, start=2):
            if any(v is None for v in row.values()) or None in row:
                raise CorpusError(f"{path}:{lineno}: wrong field count")
            song_id = row["song_id"].strip()
            if not song_id:
                raise CorpusError(f"{path}:{lineno}: empty song_id")
            if song_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate song_id {song_id!r}")
            seen.add(song_id)
            charted = frozenset(
                c.strip() for c in row["chart_countries"].split(";") if c.strip())
            if not charted:
                raise CorpusError(f"{path}:{lineno}: empty chart_countries")
            songs.append(SongMeta(
                song_id=song_id,
                country=row["country"].strip(),
                region=row["region"].strip(),
                audio_path=row["audio_path"].strip(),
                chart_countries=charted,
            ))
    if not songs:
        raise CorpusError(f"empty manifest: {path}")
    return CorpusManifest(songs=tuple(songs), seed=seed)


def apply_sampling(manifest: CorpusManifest) -> CorpusManifest:
    """Exclusivity filter, 1500-per-country cap, 50-song country floor.

    Subsampling uses the (seed, "sample", country) substream, so the
    retained set is reproducible and independent of other countries.
    Idempotent: a manifest that already satisfies the rules is returned
    with the identical song set.
    """
    exclusive = [s for s in manifest.songs if s.exclusive]
    by_country: dict[str, list[SongMeta]] = {}
    for song in exclusive:
        by_country.setdefault(song.country, []).append(song)

    keep_ids: set[str] = set()
    for country in sorted(by_country):
        group = by_country[country]
        if len(group) < MIN_PER_COUNTRY:
            logger.info("dropping %s: only %d songs", country, len(group))
            continue
        if len(group) > MAX_PER_COUNTRY:
            ordered = sorted(g.song_id for g in group)
            stream = rng.Stream(rng.derive(manifest.seed, "sample", country))
            chosen = stream.choose(len(ordered), MAX_PER_COUNTRY)
            keep_ids.update(ordered[i] for i in chosen)
        else:
            keep_ids.update(g.song_id for g in group)

    kept = tuple(s for s in manifest.songs if s.song_id in keep_ids)
    if not kept:
        raise CorpusError("sampling removed every song "
                          "(all countries below the 50-song floor?)")
    return CorpusManifest(songs=kept, seed=manifest.seed)


def write_manifest(manifest: CorpusManifest, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for s in manifest.songs:
            writer.writerow([s.song_id, s.country, s.region, s.audio_path,
                             ";".join(sorted(s.chart_countries))])


def _parse_fraction(text: str, what: str, where: str) -> Optional[float]:
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise CorpusError(f"{where}: {what} value {value} outside [0, 1]")
    return value


def load_demographics(path, known_countries=None) -> DemographicTable:
    """Load the fractionalization/heterozygosity table.

    Empty cells stay absent (never coerced to 0).  Countries not in
    known_countries are retained but reported via `unmatched`.
    """
    values: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, DEMOGRAPHICS_COLUMNS, path)
        for lineno, row in enumerate(reader, start=2):
            country = row["country"].strip()
            if not country:
                raise CorpusError(f"{path}:{lineno}: empty country")
            if country in values:
                raise CorpusError(f"{path}:{lineno}: duplicate country {country!r}")
            entry = {}
            for factor in DEMOGRAPHIC_FACTORS:
                v = _parse_fraction(row[factor] or "", factor, f"{path}:{lineno}")
                if v is not None:
                    entry[factor] = v
            values[country] = entry
    unmatched = frozenset()
    if known_countries is not None:
        unmatched = frozenset(values) - frozenset(known_countries)
        if unmatched:
            logger.warning("demographics for countries outside the corpus: %s",
                           sorted(unmatched))
    return DemographicTable(values=values, unmatched=unmatched)


def load_distances(path, known_countries=None, tolerance: float = 1e-9) -> DistanceTable:
    """Load pairwise linguistic distances; asymmetry beyond tolerance fails."""
    pairs: dict[frozenset, float] = {}
    seen_directed: dict[tuple[str, str], float] = {}
    countries: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, DISTANCE_COLUMNS, path)
        for lineno, row in enumerate(reader, start=2):
            a, b = row["country_a"].strip(), row["country_b"].strip()
            d = float(row["distance"])
            where = f"{path}:{lineno}"
            if d < 0:
                raise CorpusError(f"{where}: negative distance {d}")
            if a == b:
                if d != 0.0:
                    raise CorpusError(f"{where}: nonzero diagonal for {a}")
                countries.add(a)
                continue
            if (a, b) in seen_directed:
                raise CorpusError(f"{where}: duplicate entry {a},{b}")
            seen_directed[(a, b)] = d
            reverse = seen_directed.get((b, a))
            if reverse is not None and abs(reverse - d) > tolerance:
                raise CorpusError(
                    f"{where}: asymmetric distance {a}<->{b}: {d} vs {reverse}")
            pairs[frozenset((a, b))] = d
            countries.update((a, b))
    unmatched = frozenset()
    if known_countries is not None:
        unmatched = countries - frozenset(known_countries)
        if unmatched:
            logger.warning("distances for countries outside the corpus: %s",
                           sorted(unmatched))
    return DistanceTable(values=pairs, countries=frozenset(countries),
                         unmatched=frozenset(unmatched))
