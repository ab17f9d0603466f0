import numpy as np
import pytest

from melrhy.density import DensityError
from melrhy.onsets import OnsetList
from melrhy.rhythm import RatioSample, ratios, rhythmic_density


def _onsets_from_iois(iois, start=0.0):
    return OnsetList(times=start + np.concatenate([[0.0], np.cumsum(iois)]))


class TestRatios:
    def test_isochronous_all_half(self):
        onsets = _onsets_from_iois([0.5] * 20)
        rs = ratios(onsets)
        assert len(rs) == 19
        assert all(s.r == 0.5 for s in rs)

    def test_duple_two_thirds(self):
        rs = ratios(_onsets_from_iois([0.50, 0.25]))
        assert len(rs) == 1
        assert abs(rs[0].r - 2.0 / 3.0) < 1e-12

    def test_extreme_ratio_excluded(self):
        rs = ratios(_onsets_from_iois([0.05, 0.95]))
        assert rs == []

    def test_boundary_excluded_strictly(self):
        rs = ratios(_onsets_from_iois([0.15, 0.85]))
        assert rs == []  # r = 0.15 exactly

    def test_overlapping_triplets(self):
        rs = ratios(_onsets_from_iois([0.3, 0.3, 0.6, 0.3]))
        assert len(rs) == 3  # sliding window of 3 over 5 onsets

    def test_insufficient_onsets(self):
        with pytest.raises(DensityError, match="insufficient onsets"):
            ratios(OnsetList(times=np.array([0.0, 0.5])))

    def test_tempo_invariance(self):
        g = np.random.default_rng(2)
        iois = g.uniform(0.2, 0.6, size=40)
        base = ratios(_onsets_from_iois(iois))
        scaled = ratios(OnsetList(times=_onsets_from_iois(iois).times * 3.7))
        assert np.allclose([s.r for s in base], [s.r for s in scaled],
                           atol=1e-12)

    def test_time_reversal_maps_r_to_1_minus_r(self):
        g = np.random.default_rng(5)
        iois = g.uniform(0.2, 0.6, size=30)
        onsets = _onsets_from_iois(iois)
        rev = OnsetList(times=np.sort(onsets.times[-1] - onsets.times))
        fwd_r = np.sort([s.r for s in ratios(onsets)])
        rev_r = np.sort([1.0 - s.r for s in ratios(rev)])
        assert np.allclose(fwd_r, rev_r, atol=1e-9)


class TestRhythmicDensity:
    def _samples(self, values):
        return [RatioSample(r=float(v), t1=0.0) for v in values]

    def test_sum_normalization_and_support(self):
        dens = rhythmic_density(self._samples([0.5] * 50))
        assert abs(dens.density.sum() - 1.0) <= 1e-9
        grid = dens.grid
        outside = (grid <= 0.15 + 1e-12) | (grid >= 0.85 - 1e-12)
        assert np.all(dens.density[outside] == 0.0)

    def test_single_peak_at_half(self):
        dens = rhythmic_density(self._samples([0.5] * 100))
        assert dens.grid[np.argmax(dens.density)] == pytest.approx(0.5)

    def test_two_equal_peaks_symmetric(self):
        vals = [1.0 / 3.0] * 60 + [2.0 / 3.0] * 60
        dens = rhythmic_density(self._samples(vals))
        d = dens.density
        assert np.max(np.abs(d - d[::-1])) < 1e-9
        i1 = int(np.argmin(np.abs(dens.grid - 1 / 3)))
        i2 = int(np.argmin(np.abs(dens.grid - 2 / 3)))
        peak = d.max()
        assert d[i1] == pytest.approx(peak, rel=1e-6)
        assert d[i2] == pytest.approx(peak, rel=1e-6)

    def test_uniform_samples_flat_density(self):
        # oracle: evenly spaced "uniform" draws remove MC noise, so the
        # KDE must sit within 15% of the flat level away from the edges
        n = 10_000
        vals = 0.15 + 0.7 * (np.arange(n) + 0.5) / n
        dens = rhythmic_density(self._samples(vals))
        grid = dens.grid
        interior = (grid > 0.15 + 3 * 0.005) & (grid < 0.85 - 3 * 0.005)
        level = dens.density[interior].mean()
        assert np.max(np.abs(dens.density[interior] - level)) < 0.15 * level

    def test_insufficient_samples(self):
        with pytest.raises(DensityError, match="insufficient"):
            rhythmic_density(self._samples([0.5] * 29))

    def test_reversal_duality_via_density(self):
        g = np.random.default_rng(11)
        vals = g.uniform(0.2, 0.8, size=500)
        fwd = rhythmic_density(self._samples(vals))
        rev = rhythmic_density(self._samples(1.0 - vals))
        assert np.max(np.abs(fwd.density - rev.density[::-1])) < 1e-9
