import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import lfilter

from factorsv.diagnostics import (DiagnosticsError, acf, inefficiency_factor, posterior_summary,
                                  reorder_columns_by_median, sign_identify_diagonal,
                                  sign_identify_maximin, summarize_trace)
from factorsv.gibbs import ChainOutput


def ar1(rho, n, seed):
    e = np.random.default_rng(seed).standard_normal(n)
    e[0] /= math.sqrt(1 - rho**2)  # start in the stationary law
    return lfilter([1.0], [1.0, -rho], e)


@pytest.fixture(scope="module")
def ar09():
    return ar1(0.9, 1_000_000, 7)


# --------------------------------------------------------------------------- acf

def test_acf_white_noise():
    x = np.random.default_rng(0).standard_normal(100_000)
    rho = acf(x, 20)
    assert rho[0] == 1.0
    assert np.all(np.abs(rho[1:]) < 0.02)


def test_acf_ar1_geometric(ar09):
    rho = acf(ar09, 10)
    np.testing.assert_allclose(rho, 0.9 ** np.arange(11), atol=0.02)


def test_acf_matches_direct_biased_sum():
    x = np.random.default_rng(1).normal(size=257)
    d = x - x.mean()
    direct = np.array([d[: x.size - k] @ d[k:] for k in range(6)]) / (d @ d)
    np.testing.assert_allclose(acf(x, 5), direct, rtol=0, atol=1e-12)


def test_acf_errors():
    with pytest.raises(DiagnosticsError):
        acf(np.ones(50), 3)
    with pytest.raises(DiagnosticsError):
        acf(np.arange(5.0), 5)


# --------------------------------------------------------------------------- inefficiency

def test_if_iid():
    x = np.random.default_rng(2).standard_normal(100_000)
    assert 0.85 <= inefficiency_factor(x) <= 1.15
    assert 0.85 <= inefficiency_factor(x, "geyer") <= 1.15


def test_if_ar1_09(ar09):
    assert abs(inefficiency_factor(ar09) / 19 - 1) < 0.15
    assert abs(inefficiency_factor(ar09, "geyer") / 19 - 1) < 0.15


def test_if_thinning_does_not_increase(ar09):
    full = inefficiency_factor(ar09)
    for s in (2, 5, 10):
        assert inefficiency_factor(ar09[::s]) <= full * 1.05


def test_if_errors():
    with pytest.raises(DiagnosticsError):
        inefficiency_factor(np.ones(1000))
    with pytest.raises(DiagnosticsError):
        inefficiency_factor(np.arange(50.0))
    with pytest.raises(DiagnosticsError):
        inefficiency_factor(np.random.default_rng(0).normal(size=500), "batch")
    x = np.random.default_rng(0).normal(size=500)
    x[3] = np.nan
    with pytest.raises(DiagnosticsError):
        inefficiency_factor(x)


# --------------------------------------------------------------------------- sign identification

def test_maximin_single_flip():
    aligned, anchors = sign_identify_maximin(np.array([[[-1.0], [0.5]]]))
    assert anchors.tolist() == [0]
    np.testing.assert_array_equal(aligned[0, :, 0], [1.0, -0.5])


def test_maximin_two_draws_by_hand():
    draws = np.array([[[0.9], [0.1]], [[-0.8], [0.2]]])
    aligned, anchors = sign_identify_maximin(draws)
    assert anchors.tolist() == [0]
    np.testing.assert_array_equal(aligned[:, :, 0], [[0.9, 0.1], [0.8, -0.2]])


def test_maximin_idempotent_on_positive_anchor():
    draws = np.array([[[0.9, 0.3], [0.1, -0.7]], [[0.8, 0.2], [-0.2, -0.5]]])
    aligned, anchors = sign_identify_maximin(draws)
    assert anchors.tolist() == [0, 1]
    again, _ = sign_identify_maximin(aligned)
    np.testing.assert_array_equal(again, aligned)
    assert np.all(aligned[:, anchors, [0, 1]] >= 0)


def test_maximin_zero_column_names_column():
    draws = np.zeros((3, 2, 2))
    draws[:, :, 0] = 1.0
    with pytest.raises(DiagnosticsError, match="column 1"):
        sign_identify_maximin(draws)


def test_diagonal_variants():
    np.testing.assert_array_equal(sign_identify_diagonal(np.array([[[-1.0], [0.5]]]))[0, :, 0],
                                  [1.0, -0.5])
    draws = np.array([[[0.1], [0.9]], [[-0.2], [-0.8]]])
    np.testing.assert_array_equal(sign_identify_diagonal(draws)[:, :, 0], [[0.1, 0.9], [0.2, 0.8]])
    pos = np.abs(draws)
    np.testing.assert_array_equal(sign_identify_diagonal(pos), pos)
    with pytest.raises(DiagnosticsError):
        sign_identify_diagonal(np.array([[[0.0], [1.0]]]))
    with pytest.raises(DiagnosticsError):
        sign_identify_diagonal(np.ones((2, 1, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_alignment_preserves_magnitudes(seed):
    draws = np.random.default_rng(seed).normal(size=(30, 4, 2))
    aligned, _ = sign_identify_maximin(draws)
    np.testing.assert_array_equal(np.abs(aligned), np.abs(draws))
    np.testing.assert_array_equal(np.abs(sign_identify_diagonal(draws)), np.abs(draws))


# --------------------------------------------------------------------------- reordering

def test_reorder_swaps_by_max_median():
    lam = np.zeros((5, 3, 2))
    lam[:, 1, 0] = 0.3
    lam[:, 2, 1] = 0.9
    f = np.arange(5 * 2 * 4, dtype=float).reshape(5, 2, 4)
    hf = -f
    out = reorder_columns_by_median(lam, f, hf)
    assert out.permutation.tolist() == [1, 0]
    np.testing.assert_array_equal(out.loadings[:, :, 0], lam[:, :, 1])
    np.testing.assert_array_equal(out.f[:, 0], f[:, 1])
    np.testing.assert_array_equal(out.h_factors[:, 1], hf[:, 0])
    again = reorder_columns_by_median(out.loadings)
    assert again.permutation.tolist() == [0, 1]


def test_reorder_commutes_with_abs_summaries():
    draws = np.random.default_rng(3).normal(size=(200, 4, 3))
    aligned, _ = sign_identify_maximin(draws)
    a = np.median(np.abs(reorder_columns_by_median(aligned).loadings), axis=0)
    perm = reorder_columns_by_median(aligned).permutation
    np.testing.assert_array_equal(a, np.median(np.abs(draws), axis=0)[:, perm])


# --------------------------------------------------------------------------- summaries

def _chain(lam, sv):
    K = lam.shape[0]
    return ChainOutput(lam, sv, np.empty((K, 0, 0)), np.empty((K, 0, 0)), (), (), {})


def test_summary_constant_draws():
    s = summarize_trace("c", np.full(500, 2.5))
    assert (s.mean, s.sd, s.q05, s.q50, s.q95, s.inefficiency) == (2.5, 0.0, 2.5, 2.5, 2.5, None)


def test_summary_uniform_grid_median():
    for K in (10, 11, 1000):
        s = summarize_trace("u", np.arange(1.0, K + 1))
        assert s.q50 == (K + 1) / 2
        assert s.q05 == pytest.approx(1 + 0.05 * (K - 1), abs=1e-12)


def test_summary_mean_matches_streaming_sum():
    x = np.random.default_rng(4).normal(3.0, 2.0, 100_001)
    total = 0.0
    comp = 0.0
    for v in x:  # Kahan-compensated one-pass sum
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    assert abs(summarize_trace("x", x).mean - total / x.size) < 1e-12


def test_posterior_summary_names_and_restrictions():
    rng = np.random.default_rng(5)
    lam = rng.normal(size=(300, 3, 2))
    lam[:, 0, 1] = 0.0
    sv = rng.normal(size=(300, 5, 3))
    chain = _chain(lam, sv)
    chain.meta["config"] = {"restriction_mask": [[True, False], [True, True], [True, True]]}
    names = [s.name for s in posterior_summary(chain)]
    assert "lambda_1_2" not in names and "lambda_3_2" in names
    assert "mu_4" not in names and "phi_4" in names and "mu_3" in names
    assert len(names) == 5 + 3 + 5 + 5
    assert all(s.inefficiency is not None for s in posterior_summary(chain))


def test_posterior_summary_empty_chain():
    with pytest.raises(DiagnosticsError):
        posterior_summary(_chain(np.empty((0, 2, 1)), np.empty((0, 3, 3))))
