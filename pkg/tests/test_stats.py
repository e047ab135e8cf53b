import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from linkshare.stats import (BinSpec, assign_bins, binned_probability_curve, ecdf, kolmogorov_sf, ks_statistic,
                             ks_two_sample, pearson_correlation, permutation_baseline, wilson_interval)

samples = st.lists(st.integers(-20, 20).map(float), min_size=1, max_size=40)


def test_ecdf_steps_and_errors():
    F = ecdf([3.0, 1.0, 1.0, 2.0])
    assert F(0.5) == 0.0 and F(1.0) == 0.5 and F(2.5) == 0.75 and F(9) == 1.0
    xs, Fs = F.steps()
    assert xs.tolist() == [1.0, 2.0, 3.0] and Fs.tolist() == [0.5, 0.75, 1.0]
    with pytest.raises(ValueError):
        ecdf([])
    with pytest.raises(ValueError):
        ecdf([1.0, np.nan])


@given(st.integers(0, 200), st.integers(1, 200))
def test_wilson_matches_textbook(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    olo, ohi = oracles.wilson(k, n)
    assert lo == pytest.approx(olo, abs=1e-12) and hi == pytest.approx(ohi, abs=1e-12)
    assert lo <= k / n <= hi


def test_wilson_known_value():
    lo, hi = wilson_interval(50, 100)
    assert (round(float(lo), 5), round(float(hi), 5)) == (0.40383, 0.59617)


@settings(max_examples=200, deadline=None)
@given(samples, samples)
def test_ks_statistic_exact(a, b):
    assert ks_statistic(a, b) == float(oracles.ks_d(a, b))
    assert ks_statistic(a, b) == pytest.approx(sps.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)


def test_ks_known_and_symmetric():
    assert ks_statistic([1, 2, 3], [2, 3, 4]) == pytest.approx(1 / 3)
    assert ks_statistic([1, 2], [1, 2]) == 0.0
    with pytest.raises(ValueError):
        ks_statistic([], [1])


@pytest.mark.parametrize("lam", [0.05, 0.3, 0.7, 0.99, 1.0, 1.36, 2.0, 4.0])
def test_kolmogorov_sf_matches_limit_distribution(lam):
    assert kolmogorov_sf(lam) == pytest.approx(sps.kstwobign.sf(lam), abs=1e-12)


def test_ks_p_value_detects_shift(rng):
    a, b = rng.normal(0, 1, 2000), rng.normal(0.3, 1, 2000)
    r = ks_two_sample(a, b)
    assert r.p_value < 1e-6 and r.n_a == r.n_b == 2000
    same = ks_two_sample(rng.normal(size=500), rng.normal(size=500))
    assert same.p_value > 1e-3


def test_pearson_against_scipy(rng):
    x = rng.normal(size=300)
    y = 0.2 * x + rng.normal(size=300)
    r, p = pearson_correlation(x, y)
    ref = sps.pearsonr(x, y)
    assert r == pytest.approx(ref[0], abs=1e-12) and p == pytest.approx(ref[1], rel=1e-9)
    with pytest.raises(ValueError):
        pearson_correlation([1, 1, 1], [1, 2, 3])


def test_assign_bins_edges():
    e = np.array([0.0, 1.0, 2.0])
    assert assign_bins([-1, 0, 0.5, 1, 2, 3, np.nan], e).tolist() == [-1, 0, 0, 1, 1, -1, -1]


def test_binned_curve_counts_and_masking():
    x = np.r_[np.zeros(40), np.ones(10)]
    y = np.r_[np.ones(20), np.zeros(20), np.ones(10)]
    c = binned_probability_curve(x, y, BinSpec(kind="edges", edges=(0.0, 0.5, 1.0)))
    assert c.count.tolist() == [40, 10]
    assert c.engaged.tolist() == [20, 10]
    assert c.p_hat.tolist() == [0.5, 1.0]
    assert c.masked.tolist() == [False, True]
    assert len(c.points()) == 1


def test_binned_curve_strata_share_edges(rng):
    x = rng.uniform(size=500)
    y = rng.random(500) < x
    s = np.where(rng.random(500) < 0.5, "a", "b")
    out = binned_probability_curve(x, y, BinSpec(n_bins=5), strata=s)
    assert set(out) == {"a", "b"}
    assert np.array_equal(out["a"].edges, out["b"].edges)
    assert (out["a"].count + out["b"].count).sum() == 500
    with pytest.raises(ValueError):
        binned_probability_curve([], [])
    with pytest.raises(ValueError):
        BinSpec(kind="edges", edges=(1.0, 1.0)).resolve([1.0])


def test_permutation_baseline_with_explicit_permutation():
    vecs = {1: np.array([1.0, 0.0]), 2: np.array([1.0, 0.0]), 3: np.array([0.0, 1.0]), 4: np.array([0.0, 1.0])}
    pairs = [(1, 2), (3, 4)]
    obs, shuf = permutation_baseline(pairs, vecs, permutation=[1, 0])
    assert obs.tolist() == [1.0, 1.0]
    assert shuf.tolist() == pytest.approx([0.0, 0.0], abs=1e-12)
    with pytest.raises(KeyError):
        permutation_baseline([(1, 9)], vecs)
