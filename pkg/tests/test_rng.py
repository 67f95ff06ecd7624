import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import kv

from bcglpm.exceptions import ValidationError
from bcglpm.rng import (GigParams, gig_mean, rng_stream, sample_gig, sample_truncnorm,
                        sample_vector_bingham)


def gig_cdf_factory(q, a, b):
    """Numerically integrated GIG CDF (log-density normalized on a grid)."""
    mean = gig_mean(q, a, b)
    x = np.geomspace(mean * 1e-7, mean * 1e4, 400001)
    logf = (q - 1) * np.log(x) - 0.5 * (a * x + b / x)
    f = np.exp(logf - logf.max())
    c = integrate.cumulative_trapezoid(f, x, initial=0.0)
    c /= c[-1]
    return lambda t: np.interp(t, x, c)


def test_streams_reproducible_and_distinct():
    a = rng_stream(7, 0).random(5)
    assert np.array_equal(a, rng_stream(7, 0).random(5))
    assert not np.array_equal(a, rng_stream(7, 1).random(5))
    with pytest.raises(ValidationError):
        rng_stream(-1, 0)


def test_gig_params_validation():
    with pytest.raises(ValidationError):
        GigParams(1.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        sample_gig(1.0, 1.0, -2.0, rng_stream(1))
    with pytest.raises(ValidationError):
        GigParams(float("nan"), 1.0, 1.0)


def test_gig_mean_bessel_ratio():
    x = sample_gig(1.0, 1.0, 1.0, rng_stream(1), size=1_000_000)
    oracle = kv(2, 1.0) / kv(1, 1.0)
    assert oracle == pytest.approx(2.6997, abs=5e-4)
    assert x.mean() == pytest.approx(oracle, rel=0.01)
    assert np.all(x > 0)


def test_gig_inverse_gaussian_moments():
    # GIG(-1/2, 1, 1) is inverse Gaussian with mu = 1, lambda = 1
    x = sample_gig(-0.5, 1.0, 1.0, rng_stream(2), size=1_000_000)
    assert x.mean() == pytest.approx(1.0, rel=0.01)
    assert x.var() == pytest.approx(1.0, rel=0.02)


@pytest.mark.parametrize("q,a,b", [
    (1.0, 1.0, 1.0),        # no-shift ratio of uniforms
    (0.3, 0.01, 0.01),      # small omega three-piece hat
    (-0.5, 2.0, 0.5),
    (-249.0, 1.0, 300.0),   # order 1 - T/2 at T = 500
    (5.0, 4.0, 9.0),        # mode shift
])
def test_gig_ks(q, a, b):
    x = sample_gig(q, a, b, rng_stream(3), size=100_000)
    assert np.all(x > 0)
    assert stats.kstest(x, gig_cdf_factory(q, a, b)).pvalue > 0.01


@pytest.mark.parametrize("q", [5e-324, 1e-15, -1e-9])
def test_gig_near_zero_order_is_continuous(q):
    # tiny orders used to lose the hat area to cancellation (or never accept)
    x = sample_gig(q, 0.01, 0.01, rng_stream(5), size=20000)
    assert stats.kstest(x, gig_cdf_factory(0.0, 0.01, 0.01)).pvalue > 1e-3


def test_gig_scalar_path_matches_distribution():
    rng = rng_stream(4)
    x = np.array([sample_gig(-249.0, 1.0, 300.0, rng) for _ in range(20_000)])
    assert isinstance(sample_gig(-249.0, 1.0, 300.0, rng), float)
    assert stats.kstest(x, gig_cdf_factory(-249.0, 1.0, 300.0)).pvalue > 0.01


def test_truncnorm_half_normal_mean():
    rng = rng_stream(5)
    pos = sample_truncnorm(np.zeros(1_000_000), True, rng)
    neg = sample_truncnorm(np.zeros(1_000_000), False, rng)
    assert pos.mean() == pytest.approx(math.sqrt(2 / math.pi), rel=0.005)
    assert neg.mean() == pytest.approx(-math.sqrt(2 / math.pi), rel=0.005)
    assert pos.min() > 0 and neg.max() < 0


def test_truncnorm_deep_tail():
    x = sample_truncnorm(np.full(200_000, -8.0), True, rng_stream(6))
    assert np.all(np.isfinite(x)) and np.all(x > 0)
    mpmath.mp.dps = 50
    # E[X | X > 0] for X ~ N(-8, 1): -8 + phi(8) / Phi(-8)
    phi = mpmath.npdf(8)
    tail = mpmath.ncdf(-8)
    oracle = float(-8 + phi / tail)
    assert x.mean() == pytest.approx(oracle, rel=0.005)


@pytest.mark.parametrize("mean,positive", [(0.5, True), (1.3, False), (-6.0, True), (7.5, False)])
def test_truncnorm_ks(mean, positive):
    x = sample_truncnorm(np.full(100_000, mean), positive, rng_stream(7))
    lo, hi = (-mean, np.inf) if positive else (-np.inf, -mean)
    assert stats.kstest(x, stats.truncnorm(lo, hi, loc=mean).cdf).pvalue > 0.01


def test_truncnorm_scalar():
    v = sample_truncnorm(-1.0, False, rng_stream(8))
    assert isinstance(v, float) and v < 0


def test_bingham_zero_is_uniform():
    x = sample_vector_bingham(np.zeros((4, 4)), rng_stream(9), size=1_000_000)
    np.testing.assert_allclose((x * x).mean(axis=0), 0.25, rtol=0.01)


def test_bingham_concentrated_vs_rejection_oracle():
    c = 10.0
    h = np.diag([c, 0.0, 0.0])
    x = sample_vector_bingham(h, rng_stream(10), size=1_000_000)
    # oracle: uniform proposals on the sphere accepted with exp(c x1^2 - c)
    rng = rng_stream(11)
    acc = []
    total = 0
    while total < 1_000_000:
        y = rng.standard_normal((2_000_000, 3))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        keep = rng.random(y.shape[0]) < np.exp(c * y[:, 0] ** 2 - c)
        acc.append(y[keep, 0] ** 2)
        total += keep.sum()
    oracle = np.concatenate(acc)[:1_000_000].mean()
    assert (x[:, 0] ** 2).mean() == pytest.approx(oracle, rel=0.02)
    # on S^2 the first coordinate is uniform on [-1, 1] a priori
    num = integrate.quad(lambda t: t * t * math.exp(c * t * t), -1, 1)[0]
    den = integrate.quad(lambda t: math.exp(c * t * t), -1, 1)[0]
    assert (x[:, 0] ** 2).mean() == pytest.approx(num / den, rel=0.01)


def test_bingham_unit_norm_and_rotation(rng):
    a = rng.standard_normal((6, 6))
    h = 3.0 * (a + a.T)
    x = sample_vector_bingham(h, rng, size=1000)
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)
    one = sample_vector_bingham(h, rng)
    assert one.shape == (6,)
    assert abs(np.linalg.norm(one) - 1.0) < 1e-12


def test_bingham_negative_exponent():
    # exp(-c x1^2): mass pushed away from e1
    x = sample_vector_bingham(np.diag([-20.0, 0.0, 0.0]), rng_stream(12), size=200_000)
    num = integrate.quad(lambda t: t * t * math.exp(-20 * t * t), -1, 1)[0]
    den = integrate.quad(lambda t: math.exp(-20 * t * t), -1, 1)[0]
    assert (x[:, 0] ** 2).mean() == pytest.approx(num / den, rel=0.02)
