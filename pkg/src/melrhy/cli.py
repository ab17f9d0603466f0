"""Command-line interface.

Subcommands: corpus, synth, extract, aggregate, divergence, permtest,
diversity, correlate, plot-data.  Exit codes: 0 success, 1 run error,
2 configuration error.  Set MELRHY_LOG=debug|info|... for log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (CorpusError, apply_sampling, load_demographics,
                     load_distances, load_manifest, write_manifest,
                     DEMOGRAPHIC_FACTORS)
from .density import (DensityError, write_density,
                      write_density_csv)
from .pipeline import (RunConfig, RunError, aggregate, country_distributions,
                       densities_root, extract_all, manifest_for,
                       song_distributions)
from .stats import (CorrResult, PairMatrix, StatsError, between_country_null,
                    bh_adjust, corr, country_pairwise_jsd, diversity,
                    mantel_spearman, partial_region, region_contrast)
from .synth import SynthError, SynthSpec, synth_corpus
from .viz import bar_svg, line_svg, scatter_svg

logger = logging.getLogger("melrhy")

_CONFIG_ERRORS = (CorpusError, SynthError, RunError, FileNotFoundError)
_RUN_ERRORS = (StatsError, DensityError, OSError, ValueError)


def _common(parser: argparse.ArgumentParser, workers: bool = False) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master random seed")
    if workers:
        parser.add_argument("--workers", type=int, default=1,
                            help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melrhy",
        description="Melodic-interval / rhythmic-ratio extraction and "
                    "cross-group divergence statistics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    corpus = sub.add_parser("corpus", help="manifest operations")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)
    sample = corpus_sub.add_parser("sample", help="apply the sampling rules")
    sample.add_argument("--manifest", required=True)
    sample.add_argument("--out", required=True)
    _common(sample)

    synth = sub.add_parser("synth", help="generate a synthetic corpus")
    synth.add_argument("--spec", required=True, help="JSON synthesis spec")
    synth.add_argument("--out", required=True, help="corpus output directory")
    _common(synth)

    extract = sub.add_parser("extract", help="batch feature extraction")
    extract.add_argument("--manifest", required=True)
    extract.add_argument("--out", required=True)
    extract.add_argument("--stems-dir", default=None,
                         help="use pre-separated stems from this directory")
    extract.add_argument("--dump-pitch", action="store_true")
    extract.add_argument("--dump-onsets", action="store_true")
    _common(extract, workers=True)

    agg = sub.add_parser("aggregate", help="mean distributions per group")
    agg.add_argument("--densities", required=True)
    agg.add_argument("--by", choices=["all", "country", "region"], default="all")
    agg.add_argument("--out", required=True)

    div = sub.add_parser("divergence", help="pairwise country JSD matrices")
    div.add_argument("--densities", required=True)
    div.add_argument("--by", choices=["country"], default="country")
    div.add_argument("--out", required=True)
    div.add_argument("--region-contrast", default=None,
                     help="also write same/different-region contrast JSON")
    div.add_argument("--n-perm", type=int, default=10_000)
    _common(div)

    perm = sub.add_parser("permtest", help="between-country label-shuffle null")
    perm.add_argument("--densities", required=True)
    perm.add_argument("--kind", choices=["melody", "rhythm"], required=True)
    perm.add_argument("--n-perm", type=int, default=1000)
    perm.add_argument("--out", required=True)
    _common(perm)

    dive = sub.add_parser("diversity", help="within-country diversity indices")
    dive.add_argument("--densities", required=True)
    dive.add_argument("--out", required=True)
    dive.add_argument("--allow-small", action="store_true",
                      help="skip the 50-song country floor")

    correl = sub.add_parser("correlate", help="diversity correlation battery")
    correl.add_argument("--diversity", required=True)
    correl.add_argument("--demographics", default=None)
    correl.add_argument("--manifest", default=None,
                        help="manifest supplying regions for partial correlation")
    correl.add_argument("--lingdist", default=None)
    correl.add_argument("--jsd", default=None,
                        help="divergence CSV (required with --lingdist)")
    correl.add_argument("--out", required=True)
    correl.add_argument("--n-boot", type=int, default=10_000)
    correl.add_argument("--n-perm", type=int, default=10_000)
    _common(correl)

    plot = sub.add_parser("plot-data", help="emit figure CSVs and SVGs")
    plot.add_argument("--densities", default=None)
    plot.add_argument("--diversity", default=None)
    plot.add_argument("--manifest", default=None)
    plot.add_argument("--correlations", default=None)
    plot.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------------------
# command bodies
# ---------------------------------------------------------------------------

def _cmd_corpus_sample(args) -> int:
    manifest = load_manifest(args.manifest, seed=args.seed)
    sampled = apply_sampling(manifest)
    write_manifest(sampled, args.out)
    print(f"retained {len(sampled.songs)} songs across "
          f"{len(sampled.countries())} countries -> {args.out}")
    return 0


def _load_synth_spec(path) -> tuple[dict[str, SynthSpec], int, int, dict]:
    with open(path) as fh:
        cfg = json.load(fh)
    specs = {}
    for country, raw in cfg["countries"].items():
        specs[country] = SynthSpec(
            melody_intervals=tuple((float(s), float(w))
                                   for s, w in raw["melody_intervals"]),
            rhythm_ratios=tuple((float(r), float(w))
                                for r, w in raw["rhythm_ratios"]),
            note_dur=float(raw.get("note_dur", 1.0)),
            base_ioi=float(raw.get("base_ioi", 0.3)),
            f0_base=float(raw.get("f0_base", 220.0)),
            duration=float(raw.get("duration", 30.0)),
        )
    return (specs, int(cfg.get("n_per_country", 10)),
            int(cfg.get("seed", 0)), cfg.get("regions", {}))


def _cmd_synth(args) -> int:
    specs, n_per_country, spec_seed, regions = _load_synth_spec(args.spec)
    seed = args.seed if args.seed != 0 else spec_seed
    manifest = synth_corpus(specs, n_per_country, args.out, seed=seed,
                            regions=regions)
    print(f"wrote {manifest}")
    return 0


def _cmd_extract(args) -> int:
    config = RunConfig(manifest_path=args.manifest, out_dir=args.out,
                       stems_dir=args.stems_dir, workers=args.workers,
                       seed=args.seed, dump_pitch=args.dump_pitch,
                       dump_onsets=args.dump_onsets)
    records = extract_all(config)
    n_ok = sum(1 for r in records if r.ok)
    n_err = sum(1 for r in records if r.status.startswith("error"))
    print(f"{n_ok} ok, {n_err} failed, {len(records)} total -> {args.out}")
    return 0


def _cmd_aggregate(args) -> int:
    groups = aggregate(args.densities, by=args.by)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for label, kinds in groups.items():
        for kind, dens in kinds.items():
            write_density(out / f"{label}.{kind}.mrd", dens)
            write_density_csv(out / f"{label}.{kind}.csv", dens)
    print(f"wrote {sum(len(k) for k in groups.values())} aggregate densities "
          f"-> {out}")
    return 0


def _write_jsd_csv(path, matrices: dict[str, PairMatrix]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "country_a", "country_b", "jsd"])
        for kind, mat in sorted(matrices.items()):
            k = len(mat.countries)
            for i in range(k):
                for j in range(i + 1, k):
                    writer.writerow([kind, mat.countries[i], mat.countries[j],
                                     repr(float(mat.values[i, j]))])


def read_jsd_csv(path) -> dict[str, PairMatrix]:
    """Rebuild PairMatrix objects from a divergence CSV."""
    entries: dict[str, dict[tuple[str, str], float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            entries.setdefault(row["kind"], {})[
                (row["country_a"], row["country_b"])] = float(row["jsd"])
    out = {}
    for kind, pairs in entries.items():
        countries = tuple(sorted({c for ab in pairs for c in ab}))
        idx = {c: i for i, c in enumerate(countries)}
        values = np.zeros((len(countries), len(countries)))
        for (a, b), v in pairs.items():
            values[idx[a], idx[b]] = v
            values[idx[b], idx[a]] = v
        out[kind] = PairMatrix(countries=countries, values=values)
    return out


def _cmd_divergence(args) -> int:
    matrices = {}
    regions_by_kind = {}
    for kind in ("melody", "rhythm"):
        profiles, regions = country_distributions(args.densities, kind)
        if len(profiles) >= 2:
            matrices[kind] = country_pairwise_jsd(profiles)
            regions_by_kind[kind] = regions
    if not matrices:
        raise RunError("need at least two countries with densities")
    _write_jsd_csv(args.out, matrices)
    print(f"wrote pairwise JSD for {sorted(matrices)} -> {args.out}")
    if args.region_contrast:
        report = {"version": __version__, "seed": args.seed}
        for kind, mat in matrices.items():
            contrast = region_contrast(mat, regions_by_kind[kind],
                                       n_perm=args.n_perm, seed=args.seed)
            report[kind] = contrast.to_dict()
        Path(args.region_contrast).write_text(json.dumps(report, indent=2))
        print(f"wrote region contrast -> {args.region_contrast}")
    return 0


def _cmd_permtest(args) -> int:
    songs = song_distributions(args.densities, args.kind)
    if not songs:
        raise RunError(f"no {args.kind} densities under {args.densities}")
    result = between_country_null(songs, n_perm=args.n_perm, seed=args.seed)
    report = {"version": __version__, "kind": args.kind, **result.to_dict()}
    Path(args.out).write_text(json.dumps(report, indent=2))
    print(f"{args.kind}: observed={result.observed:.6f} z={result.z:.2f} "
          f"d={result.cohens_d:.2f} p={result.p:.4g} -> {args.out}")
    return 0


def _cmd_diversity(args) -> int:
    manifest = manifest_for(args.densities)
    country_of = {s.song_id: s.country for s in manifest.songs}
    rows = []
    for kind in ("melody", "rhythm"):
        from .pipeline import load_song_densities
        from .stats import Distribution
        songs = load_song_densities(args.densities, kind)
        by_country: dict[str, list] = {}
        for sid, dens in songs.items():
            if sid in country_of:
                by_country.setdefault(country_of[sid], []).append(
                    Distribution.from_density(dens))
        if len(by_country) < 1:
            continue
        for index in diversity(by_country, enforce_floor=not args.allow_small):
            rows.append([index.country, index.kind,
                         repr(index.raw_median_jsd), repr(index.normalized)])
    if not rows:
        raise RunError(f"no densities under {args.densities}")
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "kind", "raw_median_jsd", "normalized"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} diversity rows -> {args.out}")
    return 0


def read_diversity_csv(path) -> dict[str, dict[str, tuple[float, float]]]:
    """kind -> country -> (raw, normalized)."""
    out: dict[str, dict[str, tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["kind"], {})[row["country"]] = (
                float(row["raw_median_jsd"]), float(row["normalized"]))
    return out


def _cmd_correlate(args) -> int:
    table = read_diversity_csv(args.diversity)
    if "melody" not in table or "rhythm" not in table:
        raise RunError("diversity CSV must contain both kinds")
    countries = sorted(set(table["melody"]) & set(table["rhythm"]))
    if len(countries) < 5:
        raise RunError(f"only {len(countries)} countries; need >= 5")
    mel = np.array([table["melody"][c][1] for c in countries])
    rhy = np.array([table["rhythm"][c][1] for c in countries])

    report: dict = {"version": __version__, "seed": args.seed,
                    "countries": countries}
    coupling = {"pearson": corr(mel, rhy, "pearson", n_boot=args.n_boot,
                                n_perm=args.n_perm, seed=args.seed).to_dict()}
    if args.manifest:
        manifest = load_manifest(args.manifest)
        region_of = {s.country: s.region for s in manifest.songs}
        missing = [c for c in countries if c not in region_of]
        if missing:
            raise RunError(f"manifest lacks regions for {missing}")
        regions = [region_of[c] for c in countries]
        coupling["partial_region"] = partial_region(
            mel, rhy, regions, n_boot=args.n_boot, n_perm=args.n_perm,
            seed=args.seed).to_dict()
    report["melody_vs_rhythm"] = coupling

    if args.demographics:
        demo = load_demographics(args.demographics, known_countries=countries)
        tests: list[tuple[str, str, CorrResult]] = []
        for kind, values in (("melody", mel), ("rhythm", rhy)):
            for factor in DEMOGRAPHIC_FACTORS:
                column = np.array(
                    [demo.get(c, factor) if demo.get(c, factor) is not None
                     else np.nan for c in countries])
                try:
                    result = corr(values, column, "pearson",
                                  n_boot=args.n_boot, n_perm=args.n_perm,
                                  seed=args.seed)
                except StatsError as exc:
                    logger.warning("skipping %s/%s correlation: %s",
                                   kind, factor, exc)
                    continue
                tests.append((kind, factor, result))
        adjusted = bh_adjust([t[2].p for t in tests]) if tests else []
        demo_report: dict = {}
        for (kind, factor, result), p_adj in zip(tests, adjusted):
            entry = result.to_dict()
            entry["p_adj"] = float(p_adj)
            demo_report.setdefault(kind, {})[factor] = entry
        report["demographics"] = demo_report

    if args.lingdist:
        if not args.jsd:
            raise RunError("--lingdist requires --jsd (divergence CSV)")
        matrices = read_jsd_csv(args.jsd)
        dist = load_distances(args.lingdist, known_countries=countries)
        ling_report = {}
        for kind, mat in sorted(matrices.items()):
            shared = [c for c in mat.countries
                      if all(dist.get(c, o) is not None
                             for o in mat.countries if o != c)]
            if len(shared) < 4:
                continue
            music = mat.reordered(shared)
            k = len(shared)
            lvals = np.zeros((k, k))
            for i in range(k):
                for j in range(i + 1, k):
                    lvals[i, j] = lvals[j, i] = dist.get(shared[i], shared[j])
            ling = PairMatrix(countries=tuple(shared), values=lvals)
            ling_report[kind] = mantel_spearman(
                music, ling, n_perm=args.n_perm, n_boot=args.n_boot,
                seed=args.seed).to_dict()
        report["linguistic"] = ling_report

    Path(args.out).write_text(json.dumps(report, indent=2))
    print(f"wrote correlation report -> {args.out}")
    return 0


def _cmd_plot_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote = 0
    if args.densities:
        groups = aggregate(args.densities, by="all")
        for kind, dens in groups["all"].items():
            write_density_csv(out / f"global.{kind}.csv", dens)
            xlabel = ("interval (semitones)" if kind == "melody"
                      else "inter-onset ratio")
            line_svg(out / f"global.{kind}.svg", dens.grid, dens.density,
                     f"Global {kind} distribution", xlabel, "density")
            wrote += 2
    if args.diversity:
        table = read_diversity_csv(args.diversity)
        if "melody" in table and "rhythm" in table:
            countries = sorted(set(table["melody"]) & set(table["rhythm"]))
            regions = {}
            if args.manifest:
                manifest = load_manifest(args.manifest)
                regions = {s.country: s.region for s in manifest.songs}
            points = [(table["melody"][c][1], table["rhythm"][c][1], c,
                       regions.get(c, "unknown")) for c in countries]
            with open(out / "diversity.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["country", "region", "melodic_diversity",
                                 "rhythmic_diversity"])
                for x, y, c, g in points:
                    writer.writerow([c, g, repr(x), repr(y)])
            scatter_svg(out / "diversity.svg", points,
                        "Melodic vs rhythmic diversity",
                        "melodic diversity", "rhythmic diversity")
            wrote += 2
    if args.correlations:
        report = json.loads(Path(args.correlations).read_text())
        bars = []
        for kind, factors in sorted(report.get("demographics", {}).items()):
            for factor, entry in sorted(factors.items()):
                bars.append((f"{kind[:3]}:{factor[:6]}", entry["estimate"],
                             entry["ci_low"], entry["ci_high"]))
        if bars:
            bar_svg(out / "demographics.svg", bars,
                    "Diversity vs demographic factors", "correlation")
            with open(out / "demographics.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["label", "estimate", "ci_low", "ci_high"])
                for label, v, lo, hi in bars:
                    writer.writerow([label, repr(v), repr(lo), repr(hi)])
            wrote += 2
    print(f"wrote {wrote} plot files -> {out}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "extract": _cmd_extract,
    "aggregate": _cmd_aggregate,
    "divergence": _cmd_divergence,
    "permtest": _cmd_permtest,
    "diversity": _cmd_diversity,
    "correlate": _cmd_correlate,
    "plot-data": _cmd_plot_data,
}


def main(argv=None) -> int:
    level = os.environ.get("MELRHY_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "corpus":
            return _cmd_corpus_sample(args)
        return _COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _RUN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
