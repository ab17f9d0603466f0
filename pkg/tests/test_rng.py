import numpy as np
from scipy.stats import kstest

from melrhy import rng


def test_streams_are_reproducible():
    a = rng.Stream(123).uniforms(100)
    b = rng.Stream(123).uniforms(100)
    assert np.array_equal(a, b)


def test_batched_draws_match_sequential():
    s1 = rng.Stream(9)
    batch = s1.uniforms(10)
    s2 = rng.Stream(9)
    singles = np.array([s2.uniform() for _ in range(10)])
    assert np.array_equal(batch, singles)


def test_derive_separates_streams():
    assert rng.derive(1, "a", "b") != rng.derive(1, "ab")
    assert rng.derive(1, "x") != rng.derive(2, "x")
    assert rng.derive(5, "clip", "s1") == rng.derive(5, "clip", "s1")


def test_uniforms_in_unit_interval_and_uniform():
    u = rng.Stream(77).uniforms(20000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert kstest(u, "uniform").pvalue > 0.01


def test_normals_moments():
    z = rng.Stream(3).normals(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_permutation_is_a_permutation():
    p = rng.Stream(11).permutation(500)
    assert np.array_equal(np.sort(p), np.arange(500))


def test_permutation_uniformity_small_n():
    # all 6 orderings of 3 items should appear roughly equally often
    counts = {}
    s = rng.Stream(42)
    for _ in range(6000):
        key = tuple(s.permutation(3))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    assert min(counts.values()) > 800


def test_choose_distinct_sorted():
    idx = rng.Stream(8).choose(100, 30)
    assert len(idx) == 30
    assert len(set(idx.tolist())) == 30
    assert np.array_equal(idx, np.sort(idx))


def test_indices_bounds():
    idx = rng.Stream(4).indices(10000, 7)
    assert idx.min() >= 0 and idx.max() <= 6
    assert len(np.unique(idx)) == 7
