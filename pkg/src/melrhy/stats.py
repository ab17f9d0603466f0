"""Divergence, permutation nulls, diversity indices, and correlations.

All divergences are Jensen-Shannon with base-2 logarithms, so values
live in [0, 1].  Every stochastic routine draws from a named substream
of the caller's seed and is bit-reproducible; permutation p-values use
the add-one estimator and can never be zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from . import rng
from .density import Density, grid_spec

PERM_DEFAULT = 1000
PAIR_PERM_DEFAULT = 10_000
BOOT_DEFAULT = 10_000
MIN_COUNTRY_SONGS = 50


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class Distribution:
    """Probability vector on one kind's fixed grid."""

    kind: str
    probs: np.ndarray

    def __post_init__(self):
        _, _, n = grid_spec(self.kind)
        if len(self.probs) != n:
            raise StatsError(f"{self.kind} distribution needs {n} bins, "
                             f"got {len(self.probs)}")
        if np.any(self.probs < 0) or not np.all(np.isfinite(self.probs)):
            raise StatsError("probabilities must be finite and nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise StatsError(f"probabilities sum to {self.probs.sum()!r}, not 1")

    @classmethod
    def from_density(cls, dens: Density) -> "Distribution":
        return cls(kind=dens.kind, probs=dens.probs())


@dataclass(frozen=True)
class CountryProfile:
    country: str
    kind: str
    mean_distribution: Distribution
    n_songs: int

    def __post_init__(self):
        if self.n_songs < MIN_COUNTRY_SONGS:
            raise StatsError(f"{self.country}: {self.n_songs} songs is below "
                             f"the {MIN_COUNTRY_SONGS}-song floor")


@dataclass(frozen=True)
class DiversityIndex:
    country: str
    kind: str
    raw_median_jsd: float
    normalized: float


@dataclass(frozen=True)
class PermResult:
    observed: float
    null_mean: float
    null_sd: float
    z: float
    cohens_d: float
    p: float
    n_perm: int
    seed: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("observed", "null_mean", "null_sd", "z", "cohens_d",
                 "p", "n_perm", "seed")}


@dataclass(frozen=True)
class CorrResult:
    method: str
    estimate: float
    ci_low: float
    ci_high: float
    p: float
    n: int
    p_adj: Optional[float] = None

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in
               ("method", "estimate", "ci_low", "ci_high", "p", "n")}
        if self.p_adj is not None:
            out["p_adj"] = self.p_adj
        return out


@dataclass(frozen=True)
class PairMatrix:
    """Symmetric country-by-country matrix with zero diagonal."""

    countries: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        k = len(self.countries)
        if self.values.shape != (k, k):
            raise StatsError("matrix shape does not match country list")
        if np.any(np.abs(np.diag(self.values)) > 1e-12):
            raise StatsError("matrix diagonal must be zero")
        if np.any(np.abs(self.values - self.values.T) > 1e-9):
            raise StatsError("matrix must be symmetric")

    def reordered(self, countries: Sequence[str]) -> "PairMatrix":
        idx = [self.countries.index(c) for c in countries]
        return PairMatrix(countries=tuple(countries),
                          values=self.values[np.ix_(idx, idx)])


# ---------------------------------------------------------------------------
# divergence
# ---------------------------------------------------------------------------

def _kl_to_mid(p: np.ndarray, m: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / m[mask])))


def jsd(p: Distribution, q: Distribution) -> float:
    """Base-2 Jensen-Shannon divergence; 0 for identical, 1 for disjoint."""
    if p.kind != q.kind:
        raise StatsError(f"kind mismatch: {p.kind} vs {q.kind}")
    return jsd_vec(p.probs, q.probs)


def jsd_vec(p: np.ndarray, q: np.ndarray) -> float:
    if p.shape != q.shape:
        raise StatsError("grid mismatch")
    m = 0.5 * (p + q)
    return 0.5 * _kl_to_mid(p, m) + 0.5 * _kl_to_mid(q, m)


def _entropy_rows(mat: np.ndarray) -> np.ndarray:
    """Base-2 entropy per row with 0*log0 = 0."""
    logs = np.zeros_like(mat)
    np.log2(mat, out=logs, where=mat > 0)
    return -(mat * logs).sum(axis=1)


def pairwise_jsd(prob_rows: np.ndarray, chunk: int = 256) -> np.ndarray:
    """All-pairs JSD for a stack of probability vectors (n x bins).

    Uses JSD(p, q) = H(m) - (H(p) + H(q)) / 2 so per-row entropies are
    shared across pairs.
    """
    n = prob_rows.shape[0]
    ent = _entropy_rows(prob_rows)
    out = np.zeros((n, n))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        mids = 0.5 * (prob_rows[start:stop, None, :] + prob_rows[None, :, :])
        h_mid = _entropy_rows(mids.reshape(-1, prob_rows.shape[1]))
        out[start:stop] = (h_mid.reshape(stop - start, n)
                           - 0.5 * (ent[start:stop, None] + ent[None, :]))
    np.fill_diagonal(out, 0.0)
    return np.clip(out, 0.0, 1.0)


def country_pairwise_jsd(profiles) -> PairMatrix:
    """Symmetric JSD matrix over country profiles.

    Accepts a mapping country -> CountryProfile or bare Distribution.
    """
    if len(profiles) < 2:
        raise StatsError("need at least two countries")
    countries = tuple(sorted(profiles))
    dists = {c: (p.mean_distribution if isinstance(p, CountryProfile) else p)
             for c, p in profiles.items()}
    kinds = {dists[c].kind for c in countries}
    if len(kinds) != 1:
        raise StatsError(f"mixed kinds in profiles: {sorted(kinds)}")
    rows = np.stack([dists[c].probs for c in countries])
    values = pairwise_jsd(rows)
    values = 0.5 * (values + values.T)  # exact symmetry
    return PairMatrix(countries=countries, values=values)


# ---------------------------------------------------------------------------
# effect sizes / permutation machinery
# ---------------------------------------------------------------------------

def cohens_d(a: np.ndarray, b: np.ndarray) -> float:
    """Standardized mean difference with pooled (ddof=1) SD."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    var1 = a.var(ddof=1) if n1 > 1 else 0.0
    var2 = b.var(ddof=1) if n2 > 1 else 0.0
    dof = n1 + n2 - 2
    pooled = math.sqrt(((n1 - 1) * var1 + (n2 - 1) * var2) / dof) if dof > 0 else 0.0
    diff = float(a.mean() - b.mean())
    if pooled == 0.0:
        return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
    return diff / pooled


def _off_diag_mean(mat: np.ndarray) -> float:
    k = mat.shape[0]
    return float(mat.sum() / (k * (k - 1)))


def _group_means(probs: np.ndarray, labels: np.ndarray,
                 group_slices: list[np.ndarray]) -> np.ndarray:
    return np.stack([probs[idx].mean(axis=0) for idx in group_slices])


def between_country_null(songs: Sequence[tuple[str, Distribution]],
                         n_perm: int = PERM_DEFAULT,
                         seed: int = 0) -> PermResult:
    """Label-shuffle null for between-country divergence.

    The statistic is the mean off-diagonal pairwise JSD between country
    mean distributions.  Permutations shuffle country labels across
    songs while preserving each country's sample size.  Cohen's d
    contrasts observed pair JSDs against the pooled null pair JSDs.
    """
    if n_perm < 100:
        raise StatsError(f"n_perm {n_perm} < 100 gives too coarse a p-value")
    if len(songs) < 2:
        raise StatsError("need at least two songs")
    labels = np.asarray([c for c, _ in songs])
    kinds = {d.kind for _, d in songs}
    if len(kinds) != 1:
        raise StatsError(f"mixed kinds: {sorted(kinds)}")
    probs = np.stack([d.probs for _, d in songs])
    countries = sorted(set(labels))
    if len(countries) < 2:
        raise StatsError("need at least two countries")

    def pair_values(lbls: np.ndarray) -> np.ndarray:
        groups = [np.nonzero(lbls == c)[0] for c in countries]
        means = _group_means(probs, lbls, groups)
        mat = pairwise_jsd(means)
        iu = np.triu_indices(len(countries), k=1)
        return mat[iu]

    observed_pairs = pair_values(labels)
    observed = float(observed_pairs.mean())

    stream = rng.Stream(rng.derive(seed, "between-country-null"))
    null_stats = np.empty(n_perm)
    null_pairs = np.empty((n_perm, len(observed_pairs)))
    for i in range(n_perm):
        perm = stream.substream("perm", i).permutation(len(labels))
        vals = pair_values(labels[perm])
        null_pairs[i] = vals
        null_stats[i] = vals.mean()

    null_mean = float(null_stats.mean())
    null_sd = float(null_stats.std(ddof=1)) if n_perm > 1 else 0.0
    if null_sd == 0.0:
        z = 0.0 if observed == null_mean else math.copysign(math.inf,
                                                            observed - null_mean)
    else:
        z = (observed - null_mean) / null_sd
    p = (1 + int(np.sum(null_stats >= observed))) / (n_perm + 1)
    d = cohens_d(observed_pairs, null_pairs.ravel())
    return PermResult(observed=observed, null_mean=null_mean, null_sd=null_sd,
                      z=float(z), cohens_d=float(d), p=float(p),
                      n_perm=n_perm, seed=seed)


@dataclass(frozen=True)
class RegionContrast:
    cohens_d: float
    p: float
    n_same: int
    n_diff: int
    n_perm: int
    seed: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("cohens_d", "p", "n_same", "n_diff", "n_perm", "seed")}


def region_contrast(matrix: PairMatrix, regions: dict[str, str],
                    n_perm: int = PAIR_PERM_DEFAULT,
                    seed: int = 0) -> RegionContrast:
    """Same-region vs different-region pair divergences.

    Cohen's d of same-region pair values minus different-region pair
    values (negative d = regional cohesion); p is one-sided toward
    smaller same-region divergence, from shuffling the same/different
    assignment over pairs.
    """
    missing = [c for c in matrix.countries if c not in regions]
    if missing:
        raise StatsError(f"countries without a region: {missing}")
    k = len(matrix.countries)
    iu, ju = np.triu_indices(k, k=1)
    vals = matrix.values[iu, ju]
    reg = np.asarray([regions[c] for c in matrix.countries])
    same = reg[iu] == reg[ju]
    n_same = int(same.sum())
    n_diff = len(vals) - n_same
    if n_same == 0 or n_diff == 0:
        raise StatsError("need both same-region and different-region pairs")
    observed = cohens_d(vals[same], vals[~same])

    stream = rng.Stream(rng.derive(seed, "region-contrast"))
    count = 0
    for i in range(n_perm):
        perm = stream.substream("perm", i).permutation(len(vals))
        shuffled = same[perm]
        d_i = cohens_d(vals[shuffled], vals[~shuffled])
        if d_i <= observed:
            count += 1
    p = (1 + count) / (n_perm + 1)
    return RegionContrast(cohens_d=float(observed), p=float(p),
                          n_same=n_same, n_diff=n_diff, n_perm=n_perm,
                          seed=seed)


# ---------------------------------------------------------------------------
# diversity
# ---------------------------------------------------------------------------

def diversity(songs_by_country: dict[str, Sequence[Distribution]],
              enforce_floor: bool = True) -> list[DiversityIndex]:
    """Within-country median pairwise JSD, min-max normalized.

    The raw index per country is the median JSD over all song pairs;
    normalization maps the smallest country to 0 and the largest to 1
    (all zeros if every country ties).
    """
    if not songs_by_country:
        raise StatsError("no countries given")
    kinds = {d.kind for dists in songs_by_country.values() for d in dists}
    if len(kinds) != 1:
        raise StatsError(f"mixed kinds: {sorted(kinds)}")
    kind = kinds.pop()
    raw: dict[str, float] = {}
    for country in sorted(songs_by_country):
        dists = songs_by_country[country]
        if enforce_floor and len(dists) < MIN_COUNTRY_SONGS:
            raise StatsError(f"{country}: {len(dists)} songs is below the "
                             f"{MIN_COUNTRY_SONGS}-song floor")
        if len(dists) < 2:
            raise StatsError(f"{country}: need at least two songs")
        probs = np.stack([d.probs for d in dists])
        mat = pairwise_jsd(probs)
        iu = np.triu_indices(len(dists), k=1)
        raw[country] = float(np.median(mat[iu]))
    lo = min(raw.values())
    hi = max(raw.values())
    span = hi - lo
    return [DiversityIndex(country=c, kind=kind, raw_median_jsd=raw[c],
                           normalized=((raw[c] - lo) / span) if span > 0 else 0.0)
            for c in sorted(raw)]


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def _complete_pairs(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise StatsError("x and y must have equal length")
    keep = ~(np.isnan(x) | np.isnan(y))
    return x[keep], y[keep]


def _pearson_rows(xm: np.ndarray, ym: np.ndarray) -> np.ndarray:
    """Row-wise Pearson correlation of two (m, n) matrices."""
    xc = xm - xm.mean(axis=1, keepdims=True)
    yc = ym - ym.mean(axis=1, keepdims=True)
    num = (xc * yc).sum(axis=1)
    den = np.sqrt((xc * xc).sum(axis=1) * (yc * yc).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


def _rank_rows(mat: np.ndarray) -> np.ndarray:
    return rankdata(mat, axis=1, method="average")


def _corr_estimate(x: np.ndarray, y: np.ndarray, method: str) -> float:
    if method == "spearman":
        x, y = rankdata(x, method="average"), rankdata(y, method="average")
    return float(_pearson_rows(x[None, :], y[None, :])[0])


def _corr_machinery(x: np.ndarray, y: np.ndarray, method: str, label: str,
                    n_boot: int, n_perm: int, seed: int) -> CorrResult:
    n = len(x)
    base = "spearman" if method == "spearman" else "pearson"
    estimate = _corr_estimate(x, y, base)

    stream = rng.Stream(rng.derive(seed, "corr", label))
    boot_idx = stream.substream("boot").indices(n_boot * n, n).reshape(n_boot, n)
    xb, yb = x[boot_idx], y[boot_idx]
    if base == "spearman":
        xb, yb = _rank_rows(xb), _rank_rows(yb)
    boot_r = _pearson_rows(xb, yb)
    boot_r = boot_r[~np.isnan(boot_r)]
    if len(boot_r) == 0:
        ci_low = ci_high = estimate
    else:
        ci_low, ci_high = np.percentile(boot_r, [2.5, 97.5])

    perm_u = stream.substream("perm").uniforms(n_perm * n).reshape(n_perm, n)
    perm_idx = np.argsort(perm_u, axis=1, kind="stable")
    yp = y[perm_idx]
    xrep = np.broadcast_to(x, (n_perm, n))
    if base == "spearman":
        xrep = _rank_rows(np.ascontiguousarray(xrep))
        yp = _rank_rows(yp)
    perm_r = _pearson_rows(np.ascontiguousarray(xrep), yp)
    perm_r = perm_r[~np.isnan(perm_r)]
    exceed = int(np.sum(np.abs(perm_r) >= abs(estimate) - 1e-12))
    p = (1 + exceed) / (len(perm_r) + 1)
    return CorrResult(method=method, estimate=estimate,
                      ci_low=float(min(ci_low, estimate)),
                      ci_high=float(max(ci_high, estimate)),
                      p=float(p), n=n)


def corr(x, y, method: str = "pearson", n_boot: int = BOOT_DEFAULT,
         n_perm: int = PAIR_PERM_DEFAULT, seed: int = 0) -> CorrResult:
    """Pearson/Spearman with percentile bootstrap CI and permutation p.

    Pairs with a missing value on either side are dropped first
    (pairwise-complete); p is two-sided via the add-one estimator.
    """
    if method not in ("pearson", "spearman"):
        raise StatsError(f"unknown method {method!r}")
    xc, yc = _complete_pairs(x, y)
    if len(xc) < 5:
        raise StatsError(f"only {len(xc)} complete pairs (need >= 5)")
    return _corr_machinery(xc, yc, method, method, n_boot, n_perm, seed)


def partial_region(x, y, regions: Sequence[str], n_boot: int = BOOT_DEFAULT,
                   n_perm: int = PAIR_PERM_DEFAULT, seed: int = 0) -> CorrResult:
    """Pearson correlation after removing per-region means from x and y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    regions = np.asarray(regions)
    if not (len(x) == len(y) == len(regions)):
        raise StatsError("x, y, regions must share length")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y, regions = x[keep], y[keep], regions[keep]
    if len(x) < 5:
        raise StatsError(f"only {len(x)} complete pairs (need >= 5)")
    xr = x.copy()
    yr = y.copy()
    for region in np.unique(regions):
        sel = regions == region
        xr[sel] -= x[sel].mean()
        yr[sel] -= y[sel].mean()
    result = _corr_machinery(xr, yr, "pearson", "partial-region",
                             n_boot, n_perm, seed)
    return CorrResult(method="partial-region", estimate=result.estimate,
                      ci_low=result.ci_low, ci_high=result.ci_high,
                      p=result.p, n=result.n)


def mantel_spearman(m1: PairMatrix, m2: PairMatrix,
                    n_perm: int = PAIR_PERM_DEFAULT,
                    n_boot: int = BOOT_DEFAULT, seed: int = 0) -> CorrResult:
    """Spearman between two pair matrices with a Mantel permutation test.

    The estimate is Spearman over upper-triangle entries; significance
    permutes one matrix's rows and columns jointly (two-sided, add-one);
    the CI bootstraps countries, recomputing the triangle correlation
    on each resample (self-pairs from duplicated countries excluded).
    """
    if set(m1.countries) != set(m2.countries):
        raise StatsError("matrices cover different country sets")
    if len(m1.countries) < 4:
        raise StatsError("need at least four countries for a Mantel test")
    m2 = m2.reordered(m1.countries)
    k = len(m1.countries)
    iu, ju = np.triu_indices(k, k=1)
    v1 = m1.values[iu, ju]
    v2 = m2.values[iu, ju]
    estimate = _corr_estimate(v1, v2, "spearman")

    stream = rng.Stream(rng.derive(seed, "mantel"))
    perm_stream = stream.substream("perm")
    count = 0
    total = 0
    r1 = rankdata(v1, method="average")
    chunk = max(1, min(n_perm, 4_000_000 // max(len(v1), 1)))
    done = 0
    while done < n_perm:
        m = min(chunk, n_perm - done)
        u = perm_stream.uniforms(m * k).reshape(m, k)
        perms = np.argsort(u, axis=1, kind="stable")
        rows = perms[:, iu]
        cols = perms[:, ju]
        vals = m2.values[rows, cols]
        ranks = _rank_rows(vals)
        r1m = np.broadcast_to(r1, (m, len(v1)))
        rs = _pearson_rows(np.ascontiguousarray(r1m), ranks)
        rs = rs[~np.isnan(rs)]
        count += int(np.sum(np.abs(rs) >= abs(estimate) - 1e-12))
        total += len(rs)
        done += m
    p = (1 + count) / (total + 1)

    boot_stream = stream.substream("boot")
    boot_vals = []
    for _ in range(n_boot):
        idx = boot_stream.indices(k, k)
        bi, bj = idx[iu], idx[ju]
        keep = bi != bj
        if keep.sum() < 3:
            continue
        b1 = m1.values[bi[keep], bj[keep]]
        b2 = m2.values[bi[keep], bj[keep]]
        if np.all(b1 == b1[0]) or np.all(b2 == b2[0]):
            continue
        boot_vals.append(_corr_estimate(b1, b2, "spearman"))
    if boot_vals:
        ci_low, ci_high = np.percentile(boot_vals, [2.5, 97.5])
    else:
        ci_low = ci_high = estimate
    return CorrResult(method="mantel-spearman", estimate=float(estimate),
                      ci_low=float(min(ci_low, estimate)),
                      ci_high=float(max(ci_high, estimate)),
                      p=float(p), n=len(v1))


def bh_adjust(p_values: Sequence[float]) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values (monotone, capped)."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size == 0:
        return p.copy()
    if np.any((p < 0) | (p > 1)):
        raise StatsError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 1.0
    for rank in range(m, 0, -1):
        idx = order[rank - 1]
        running = min(running, p[idx] * m / rank)
        adjusted[idx] = running
    return adjusted
