import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sp

from qsdlab.stats import (
    bootstrap_counts,
    chi2_gof,
    mann_kendall,
    merge_small_bins,
    tv_distance,
)


class TestTvDistance:
    def test_hand_values(self):
        assert tv_distance([1, 0], [0, 1]) == pytest.approx(1.0)
        assert tv_distance([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.25)
        assert tv_distance([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0

    def test_symmetric(self):
        p = np.array([0.1, 0.6, 0.3])
        q = np.array([0.4, 0.4, 0.2])
        assert tv_distance(p, q) == tv_distance(q, p)


class TestMergeSmallBins:
    def test_no_merge_when_all_bins_fat(self):
        counts = np.array([10.0, 20.0, 30.0])
        probs = np.array([0.2, 0.3, 0.5])
        mc, mp = merge_small_bins(counts, probs, min_expected=5.0)
        np.testing.assert_array_equal(mc, counts)
        np.testing.assert_array_equal(mp, probs)

    def test_thin_tail_folds_into_neighbor(self):
        # 100 samples; last two bins expect 1 each -> folded together with
        # the bulk until the 5-count floor is met
        counts = np.array([90.0, 8.0, 1.0, 1.0])
        probs = np.array([0.9, 0.08, 0.01, 0.01])
        mc, mp = merge_small_bins(counts, probs, min_expected=5.0)
        assert mc.sum() == counts.sum()
        assert mp.sum() == pytest.approx(probs.sum())
        assert (mp * counts.sum() >= 5.0).all()

    @given(
        st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=12),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_mass_and_count_preserved(self, raw_counts, seed):
        gen = np.random.Generator(np.random.PCG64(seed))
        probs = gen.dirichlet(np.ones(len(raw_counts)))
        counts = np.asarray(raw_counts, dtype=float)
        mc, mp = merge_small_bins(counts, probs)
        assert mc.sum() == pytest.approx(counts.sum())
        assert mp.sum() == pytest.approx(probs.sum())
        # every merged bin clears the floor, except a single undersized
        # remainder when the whole vector is too thin to split at all
        if len(mc) > 1:
            assert (mp * counts.sum() >= 5.0).all()


class TestChi2:
    def test_matches_scipy_when_no_merging(self):
        counts = np.array([48.0, 31.0, 21.0])
        probs = np.array([0.5, 0.3, 0.2])
        stat, p, dof = chi2_gof(counts, probs)
        ref = sp.chisquare(counts, f_exp=probs * counts.sum())
        assert stat == pytest.approx(ref.statistic, rel=1e-12)
        assert p == pytest.approx(ref.pvalue, rel=1e-12)
        assert dof == 2

    def test_perfect_fit(self):
        counts = np.array([50.0, 30.0, 20.0])
        stat, p, _ = chi2_gof(counts, np.array([0.5, 0.3, 0.2]))
        assert stat == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx(1.0)

    def test_single_bin_is_vacuous(self):
        stat, p, dof = chi2_gof(np.array([7.0]), np.array([1.0]))
        assert dof == 0
        assert p == 1.0

    def test_detects_gross_mismatch(self):
        counts = np.array([90.0, 10.0])
        _, p, _ = chi2_gof(counts, np.array([0.5, 0.5]))
        assert p < 1e-10


class TestMannKendall:
    def test_strictly_decreasing(self):
        s, z, p = mann_kendall(np.arange(20.0)[::-1])
        assert s == -190  # all 20*19/2 pairs discordant
        assert z < 0
        assert p < 1e-8

    def test_strictly_increasing(self):
        _, _, p = mann_kendall(np.arange(20.0))
        assert p > 1 - 1e-8

    def test_constant_series(self):
        s, z, p = mann_kendall(np.ones(15))
        assert s == 0
        assert z == 0.0
        assert p == 0.5

    def test_short_series_vacuous(self):
        assert mann_kendall([3.0, 1.0]) == (0, 0.0, 1.0)

    def test_nan_entries_dropped(self):
        clean = mann_kendall([5.0, 4.0, 3.0, 2.0, 1.0])
        holey = mann_kendall([5.0, np.nan, 4.0, 3.0, np.nan, 2.0, 1.0])
        assert holey == clean


class TestBootstrapCounts:
    def test_deterministic_and_total_preserving(self):
        counts = np.array([40, 35, 25])
        a = bootstrap_counts(counts, 50, seed=3)
        b = bootstrap_counts(counts, 50, seed=3)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (50, 3)
        assert (a.sum(axis=1) == 100).all()

    def test_seed_changes_resamples(self):
        counts = np.array([40, 35, 25])
        a = bootstrap_counts(counts, 50, seed=3)
        c = bootstrap_counts(counts, 50, seed=4)
        assert (a != c).any()

    def test_empty_counts(self):
        out = bootstrap_counts(np.zeros(4, dtype=int), 10, seed=0)
        assert out.shape == (10, 4)
        assert not out.any()
