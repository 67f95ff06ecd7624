import logging

import mpmath
import numpy as np
import pytest

from bcglpm import cgm
from bcglpm.exceptions import NumericalError, ValidationError
from bcglpm.rng import rng_stream
from bcglpm.var import compute_suffstats

from conftest import random_spd


def lag0_stats(y):
    return compute_suffstats(y, np.zeros((y.shape[0], 0)))


def test_spike_slab():
    sp = cgm.SpikeSlab(0.02, 50)
    assert sp.v1 == pytest.approx(1.0)
    g = np.array([[0, 1], [1, 0]])
    np.testing.assert_allclose(sp.variances(g), [[1.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(sp.variances(np.zeros((2, 2))), [[1.0, 4e-4], [4e-4, 1.0]])
    with pytest.raises(ValidationError):
        cgm.SpikeSlab(0.02, 1.0)
    with pytest.raises(ValidationError):
        cgm.SpikeSlab(0.0, 5.0)


def test_edge_probability_zero_sigma():
    p = cgm.edge_inclusion_prob(np.eye(2), cgm.SpikeSlab(0.02, 50), np.full((2, 2), 0.5))
    assert p[0, 1] == pytest.approx(0.02 / 1.02, rel=1e-12)
    assert p[0, 0] == 0.0


def test_edge_probability_prior_dominance():
    sigma = np.array([[1.0, 0.0], [0.0, 1.0]])
    p = cgm.edge_inclusion_prob(sigma, cgm.SpikeSlab(0.02, 50), np.full((2, 2), 1.0))
    assert p[0, 1] == pytest.approx(1.0 - 1e-12)


def test_edge_probability_large_sigma_vs_high_precision():
    sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
    p = cgm.edge_inclusion_prob(sigma, cgm.SpikeSlab(0.02, 50), np.full((2, 2), 0.5))
    mpmath.mp.dps = 60
    b1 = mpmath.mpf("0.5") / 1 * mpmath.exp(-mpmath.mpf("0.25") / 2)
    b2 = mpmath.mpf("0.5") / mpmath.mpf("0.02") * mpmath.exp(-mpmath.mpf("0.25") / (2 * mpmath.mpf("0.0004")))
    exact = float(b1 / (b1 + b2))
    assert exact > 1 - 1e-12
    assert p[0, 1] == pytest.approx(min(exact, 1 - 1e-12), abs=1e-15)


@pytest.mark.parametrize("n,value", [(3, 1.0 - 1e-12), (100, 2.0 / 99), (11, 0.2)])
def test_sssl_prior(n, value):
    pr = cgm.sssl_edge_prior(n)
    assert pr[0, 1] == pytest.approx(value, rel=1e-12)
    assert np.all(np.diag(pr) == 0)
    assert n != 100 or pr[0, 1] == pytest.approx(0.0202, abs=1e-4)


def test_sssl_prior_small_n():
    with pytest.raises(ValidationError):
        cgm.sssl_edge_prior(1)


def test_update_graph_symmetry_and_frequency():
    rng = rng_stream(1)
    sp = cgm.SpikeSlab(0.02, 50)
    sigma = np.array([[1.0, 0.05, 0.0], [0.05, 1.0, 0.01], [0.0, 0.01, 1.0]])
    gam = np.full((3, 3), 0.3)
    expected = cgm.edge_inclusion_prob(sigma, sp, gam)
    st = cgm.CovGraphState(sigma, np.zeros((3, 3), dtype=np.int8))
    acc = np.zeros((3, 3))
    for _ in range(20000):
        cgm.update_graph(st, sp, gam, rng)
        g = st.graph
        assert np.array_equal(g, g.T) and not np.any(np.diag(g))
        acc += g
    np.testing.assert_allclose(acc / 20000, expected, atol=0.012)


def test_fast_inverse_matches_recompute():
    rng = rng_stream(2)
    y = rng.standard_normal((60, 6)) @ np.linalg.cholesky(random_spd(rng, 6)).T
    stats = lag0_stats(y)
    sp = cgm.SpikeSlab(0.02, 50)
    a = cgm.CovGraphState.initial(6)
    b = cgm.CovGraphState.initial(6)
    ra, rb = rng_stream(5), rng_stream(5)
    prior = cgm.sssl_edge_prior(6)
    for _ in range(50):
        cgm.sweep_sigma(a, stats, sp, ra, fast_inverse=True)
        cgm.sweep_sigma(b, stats, sp, rb, fast_inverse=False)
        cgm.update_graph(a, sp, prior, ra)
        cgm.update_graph(b, sp, prior, rb)
    np.testing.assert_allclose(a.sigma, b.sigma, rtol=1e-8, atol=1e-10)
    assert np.array_equal(a.graph, b.graph)


def test_single_column_update_keeps_spd(rng):
    y = rng.standard_normal((30, 5))
    stats = lag0_stats(y)
    st = cgm.CovGraphState.initial(5)
    for i in range(5):
        cgm.update_sigma_column(st, stats, cgm.SpikeSlab(), i, rng)
        cgm.check_state(st)
    assert np.allclose(st.sigma, st.sigma.T)


def test_diffuse_prior_posterior_mean_tracks_sample_covariance():
    rng = rng_stream(3)
    n, t = 3, 300
    true = np.array([[1.0, 0.4, 0.2], [0.4, 1.0, -0.3], [0.2, -0.3, 1.0]])
    y = rng.standard_normal((t, n)) @ np.linalg.cholesky(true).T
    stats = lag0_stats(y)
    sp = cgm.SpikeSlab(10.0, 1.0001)
    st = cgm.CovGraphState.initial(n)
    draws = []
    for k in range(3000):
        cgm.sweep_sigma(st, stats, sp, rng)
        if k >= 300:
            draws.append(st.sigma.copy())
    mean = np.mean(draws, axis=0)
    ref = stats.s_y_given_x / t
    assert np.linalg.norm(mean - ref) / np.linalg.norm(ref) < 0.05


def test_nonpositive_b_is_clamped(caplog):
    stats = lag0_stats(np.zeros((5, 2)))
    st = cgm.CovGraphState.initial(2)
    with caplog.at_level(logging.WARNING, logger="bcglpm.cgm"):
        cgm.update_sigma_column(st, stats, cgm.SpikeSlab(), 0, rng_stream(4))
    assert "clamped" in caplog.text
    assert st.sigma[0, 0] > 0


def test_check_state_flags_bad_graph():
    st = cgm.CovGraphState(np.eye(2), np.array([[0, 1], [0, 0]], dtype=np.int8))
    with pytest.raises(NumericalError):
        cgm.check_state(st)
    st = cgm.CovGraphState(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros((2, 2), dtype=np.int8))
    with pytest.raises(NumericalError):
        cgm.check_state(st)
