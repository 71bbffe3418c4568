import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from spatial_exit.errors import AllSameOutcome, PerfectSeparation, RankDeficient
from spatial_exit.probit import (mills, probit_fit, probit_hessian,
                                 probit_loglik, probit_score,
                                 separating_direction)


def _fixture(seed, n, beta):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    y = (X @ beta + rng.standard_normal(n) >= 0).astype(float)
    return X, y


def _grid_argmax(X, y, lo, hi, h):
    """Brute-force maximizer of the probit log-likelihood on a square grid."""
    g0 = np.arange(lo[0], hi[0] + h / 2, h)
    g1 = np.arange(lo[1], hi[1] + h / 2, h)
    B0, B1 = np.meshgrid(g0, g1, indexing="ij")
    q = 2 * y - 1
    idx = B0[..., None] * X[:, 0] + B1[..., None] * X[:, 1]
    ll = special.log_ndtr(q * idx).sum(axis=-1)
    i, j = np.unravel_index(np.argmax(ll), ll.shape)
    return np.array([g0[i], g1[j]])


def test_loglik_at_zero_is_n_log_half():
    X, y = _fixture(0, 37, np.array([0.2, 0.5]))
    assert probit_loglik(np.zeros(2), X, y) == pytest.approx(37 * math.log(0.5), rel=1e-15)


def test_loglik_single_point():
    # Phi(1.2815515655446004) = 0.9
    X = np.array([[1.2815515655446004]])
    assert probit_loglik(np.array([1.0]), X, np.array([1.0])) == pytest.approx(math.log(0.9), abs=1e-14)
    assert probit_loglik(np.array([1.0]), X, np.array([0.0])) == pytest.approx(math.log(0.1), abs=1e-13)


@pytest.mark.parametrize("ybar, expected", [(0.5, 0.0), (0.75, 0.6744897501960817),
                                            (0.2, -0.8416212335729143)])
def test_intercept_only_closed_form(ybar, expected):
    n = 40
    y = np.zeros(n)
    y[: int(round(ybar * n))] = 1.0
    fit = probit_fit(np.ones((n, 1)), y)
    assert fit.converged
    assert fit.beta_hat[0] == pytest.approx(expected, abs=1e-8)
    assert fit.beta_hat[0] == pytest.approx(special.ndtri(ybar), abs=1e-8)


@pytest.mark.parametrize("seed, n, beta", [(1, 30, (0.3, 1.0)),
                                           (2, 45, (-0.5, 0.7)),
                                           (3, 60, (0.0, -1.2))])
def test_matches_grid_search(seed, n, beta):
    X, y = _fixture(seed, n, np.array(beta))
    fit = probit_fit(X, y)
    coarse = _grid_argmax(X, y, (-4, -4), (4, 4), 0.05)
    h = 0.002
    fine = _grid_argmax(X, y, coarse - 0.1, coarse + 0.1, h)
    np.testing.assert_allclose(fit.beta_hat, fine, atol=h)
    assert fit.loglik >= probit_loglik(fine, X, y) - 1e-12


def test_score_and_hessian_by_finite_differences():
    X, y = _fixture(4, 50, np.array([0.1, 0.8]))
    X = np.column_stack([X, np.random.default_rng(9).standard_normal(50)])
    b = np.array([0.2, 0.5, -0.3])
    h = 1e-6
    eye = np.eye(3)
    num_g = [(probit_loglik(b + h * e, X, y) - probit_loglik(b - h * e, X, y)) / (2 * h)
             for e in eye]
    np.testing.assert_allclose(probit_score(b, X, y), num_g, rtol=1e-6)
    num_H = np.array([(probit_score(b + h * e, X, y) - probit_score(b - h * e, X, y)) / (2 * h)
                      for e in eye])
    np.testing.assert_allclose(probit_hessian(b, X, y), num_H, rtol=1e-6)


def test_mills_tails_are_finite():
    z = np.array([-40.0, -10.0, 0.0, 10.0, 40.0])
    m = mills(z)
    assert np.all(np.isfinite(m))
    # lambda(z) ~ -z for z -> -inf
    assert m[0] == pytest.approx(40.0, rel=1e-3)
    # lambda(0) = 2 phi(0) = sqrt(2 / pi)
    assert m[2] == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_loglik_path_monotone_and_score_small(seed):
    rng = np.random.default_rng(seed)
    n = 80
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y = (X @ np.array([0.0, 0.6, -0.4]) + rng.standard_normal(n) >= 0).astype(float)
    fit = probit_fit(X, y)
    path = np.array(fit.loglik_path)
    assert np.all(np.diff(path) >= -1e-13 * np.abs(path[1:]))
    assert np.max(np.abs(probit_score(fit.beta_hat, X, y))) < 1e-6
    # vcov is the inverse observed information
    np.testing.assert_allclose(fit.vcov @ -probit_hessian(fit.beta_hat, X, y),
                               np.eye(3), atol=1e-8)


def test_errors():
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    with pytest.raises(AllSameOutcome):
        probit_fit(X, np.ones(6))
    with pytest.raises(RankDeficient):
        probit_fit(np.column_stack([X, 2 * X[:, 1]]), np.r_[0, 1, 0, 1, 0, 1.0])
    with pytest.raises(PerfectSeparation):
        probit_fit(X, np.r_[0, 0, 0, 1, 1, 1.0])
    # quasi-complete: one tie at the threshold
    Xq = np.column_stack([np.ones(7), [0, 1, 2, 3, 3, 4, 5.0]])
    with pytest.raises(PerfectSeparation):
        probit_fit(Xq, np.r_[0, 0, 0, 0, 1, 1, 1.0])


def test_overlapping_data_not_flagged():
    X, y = _fixture(5, 200, np.array([0.0, 1.0]))
    assert separating_direction(X, y) is None
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    assert separating_direction(X, np.r_[0, 1, 0, 1, 0, 1.0]) is None
