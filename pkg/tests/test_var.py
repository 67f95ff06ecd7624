import math

import numpy as np
import pytest
from scipy.special import logsumexp

from bcglpm.exceptions import ValidationError
from bcglpm.rng import rng_stream
from bcglpm.var import (TimeSeriesPanel, build_lagged_design, compute_suffstats,
                        log_marginal_likelihood, posterior_mean_A, reconstruct_sigma,
                        ridge_coefficients, select_ridge, standardize, structural_decomposition)

from conftest import random_spd


def test_panel_validation():
    with pytest.raises(ValidationError):
        TimeSeriesPanel(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        TimeSeriesPanel(np.zeros((3, 2)), labels=["a"])
    p = TimeSeriesPanel(np.arange(6.0).reshape(3, 2))
    assert (p.T, p.n) == (3, 2)
    assert p.m.shape == (3, 0)


def test_standardize_flags_and_moments(rng):
    p = standardize(TimeSeriesPanel(rng.standard_normal((50, 3)) * 5 + 2, rng.standard_normal((50, 1))))
    assert p.standardized
    np.testing.assert_allclose(p.y.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(p.y.std(axis=0), 1, atol=1e-12)
    np.testing.assert_allclose(p.m.std(axis=0), 1, atol=1e-12)


def test_lag_designs(rng):
    p = TimeSeriesPanel(rng.standard_normal((10, 3)), rng.standard_normal((10, 2)))
    y, x = build_lagged_design(p, "lag0")
    assert y.shape == (10, 3) and x.shape == (10, 0)
    y, x = build_lagged_design(p, "lag1")
    assert y.shape == (9, 3) and x.shape == (9, 5)
    np.testing.assert_array_equal(x[:, :3], p.y[:-1])
    np.testing.assert_array_equal(x[:, 3:], p.m[:-1])
    with pytest.raises(ValidationError):
        build_lagged_design(TimeSeriesPanel(np.ones((1, 2))), "lag1")
    with pytest.raises(ValidationError):
        build_lagged_design(p, "lag2")


def test_lag0_stats_are_gram(rng):
    y = rng.standard_normal((20, 4))
    s = compute_suffstats(y, np.zeros((20, 0)))
    np.testing.assert_allclose(s.s_y_given_x, y.T @ y)
    assert s.k == 0 and s.T_eff == 20


def test_schur_identity(rng):
    y, x = rng.standard_normal((30, 4)), rng.standard_normal((30, 6))
    s = compute_suffstats(y, x, eta=2.5)
    ref = s.s_yy - s.s_yx @ np.linalg.inv(s.s_xx) @ s.s_yx.T
    assert np.linalg.norm(s.s_y_given_x - ref) / np.linalg.norm(ref) < 1e-10
    np.testing.assert_allclose(s.s_xx, x.T @ x + 2.5 * np.eye(6))
    assert np.all(np.linalg.eigvalsh(s.s_y_given_x) > 0)


def test_large_eta_limit(rng):
    y, x = rng.standard_normal((30, 3)), rng.standard_normal((30, 4))
    s = compute_suffstats(y, x, eta=1e12)
    np.testing.assert_allclose(s.s_y_given_x, y.T @ y, rtol=1e-8)


def test_bad_eta(rng):
    with pytest.raises(ValidationError):
        compute_suffstats(rng.standard_normal((5, 2)), rng.standard_normal((5, 1)), eta=0.0)


def test_marginal_likelihood_monte_carlo_oracle():
    # n=2, k=1, T=5: average the Gaussian likelihood over prior draws of A
    rng = rng_stream(21)
    n, k, t, eta = 2, 1, 5, 1.5
    sigma = np.array([[1.0, 0.3], [0.3, 0.8]])
    x = rng.standard_normal((t, k))
    y = x @ np.array([[0.4, -0.2]]) + rng.standard_normal((t, n)) @ np.linalg.cholesky(sigma).T
    cf = log_marginal_likelihood(compute_suffstats(y, x, eta), sigma)

    chol = np.linalg.cholesky(sigma)
    prec = np.linalg.inv(sigma)
    const = -0.5 * n * t * math.log(2 * math.pi) - 0.5 * t * math.log(np.linalg.det(sigma))
    logs = []
    for _ in range(10):
        # vec A ~ N(0, Psi (x) Sigma) with Psi = 1/eta
        a = (rng.standard_normal((1_000_000, n)) @ chol.T) / math.sqrt(eta)
        r = y[None, :, :] - x[None, :, 0:1] * a[:, None, :]
        q = np.einsum("dti,ij,dtj->d", r, prec, r)
        logs.append(logsumexp(const - 0.5 * q) - math.log(1_000_000))
    mc = logsumexp(logs) - math.log(len(logs))
    assert abs(mc - cf) < 0.02


def test_marginal_likelihood_lag0_is_gaussian(rng):
    sigma = random_spd(rng, 3)
    y = rng.standard_normal((7, 3))
    s = compute_suffstats(y, np.zeros((7, 0)))
    from scipy.stats import multivariate_normal
    ref = multivariate_normal(np.zeros(3), sigma).logpdf(y).sum()
    assert log_marginal_likelihood(s, sigma) == pytest.approx(ref, rel=1e-12)


def test_posterior_mean_is_ridge(rng):
    y, x = rng.standard_normal((40, 3)), rng.standard_normal((40, 5))
    coef = ridge_coefficients(y, x, 3.0)
    ref = np.linalg.solve(x.T @ x + 3.0 * np.eye(5), x.T @ y)
    np.testing.assert_allclose(coef, ref, atol=1e-12)
    np.testing.assert_allclose(posterior_mean_A(compute_suffstats(y, x, 3.0)), ref.T, atol=1e-12)


def test_select_ridge_on_grid(rng):
    p = TimeSeriesPanel(rng.standard_normal((80, 4)))
    grid = (0.1, 1.0, 10.0, 100.0)
    ch = select_ridge(p, "lag1", grid)
    assert ch.c0 in grid
    assert ch.eta == pytest.approx(ch.c0 * 4)
    assert [c for c, _ in ch.msfe_curve] == list(grid)
    with pytest.raises(ValidationError):
        select_ridge(p, "lag0", grid)
    with pytest.raises(ValidationError):
        select_ridge(p, "lag1", (1.0, 0.5))


def test_select_ridge_first_small_difference():
    # hand-made panel: the MSFE barely moves, so the first grid value wins
    rng = rng_stream(3)
    p = TimeSeriesPanel(rng.standard_normal((200, 2)) * 0.01)
    assert select_ridge(p, "lag1", (1.0, 2.0, 3.0), tol=0.01).c0 == 1.0
    # with a zero tolerance nothing qualifies and the midpoint is used
    assert select_ridge(p, "lag1", (1.0, 2.0, 3.0), tol=0.0).c0 == 2.0


def test_structural_two_node_example():
    b, q = structural_decomposition(np.array([[1.0, 0.5], [0.5, 1.0]]), [[], [0]])
    assert b[1, 0] == pytest.approx(0.5)
    assert q[1] == pytest.approx(0.75)
    assert q[0] == pytest.approx(1.0)


def test_structural_round_trip_triangular(rng):
    sigma = random_spd(rng, 6)
    parents = [list(range(i)) for i in range(6)]
    b, q = structural_decomposition(sigma, parents)
    np.testing.assert_allclose(reconstruct_sigma(b, q), sigma, atol=1e-10)


def test_structural_bad_parents():
    with pytest.raises(ValidationError):
        structural_decomposition(np.eye(2), [[0], []])
