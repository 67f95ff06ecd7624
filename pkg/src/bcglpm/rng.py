"""Seedable random streams and the nonstandard samplers used by the Gibbs sweep.

Three distributions are needed beyond what numpy ships:

* the generalized inverse Gaussian (Schur-complement update of a covariance
  column),
* the unit-variance normal truncated to one half-line (latent similarities),
* the vector Bingham distribution on the unit sphere (columns of the latent
  coordinate matrix).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .exceptions import ValidationError

DEFAULT_SEED = 20160601

# Truncation points beyond this many standard deviations use the
# exponential-proposal tail sampler instead of the inverse CDF.
TAIL_SWITCH = 5.0


def rng_stream(seed=DEFAULT_SEED, stream_id=0):
    """Return the generator for chain `stream_id` of a run seeded with `seed`.

    Streams are Philox counter-based generators keyed by the pair
    ``(seed, stream_id)``, so equal pairs replay the same draws and distinct
    stream ids give statistically independent sequences.
    """
    if seed < 0 or stream_id < 0:
        raise ValidationError("seed and stream_id must be non-negative")
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream_id)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GigParams:
    """Parameters of GIG(q, a, b) with density ∝ x^(q-1) exp(-(a x + b/x) / 2)."""

    q: float
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValidationError(f"GIG needs a > 0 and b > 0, got a={self.a}, b={self.b}")
        if not math.isfinite(self.q):
            raise ValidationError("GIG order q must be finite")


def gig_mean(q, a, b):
    """Mean of GIG(q, a, b) via the Bessel-function ratio."""
    from scipy.special import kve

    w = math.sqrt(a * b)
    return math.sqrt(b / a) * kve(q + 1, w) / kve(q, w)


def _gig_mode(lam, omega):
    if lam >= 1.0:
        return (math.sqrt((lam - 1.0) ** 2 + omega * omega) + (lam - 1.0)) / omega
    return omega / (math.sqrt((1.0 - lam) ** 2 + omega * omega) + (1.0 - lam))


def _rou_shift(lam, omega):
    # ratio-of-uniforms with the mode as shift (Hormann & Leydold 2014)
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)

    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    p = b - a * a / 3.0
    qq = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    fi = math.acos(max(-1.0, min(1.0, -qq / (2.0 * math.sqrt(-(p ** 3) / 27.0)))))
    fak = 2.0 * math.sqrt(-p / 3.0)
    y1 = fak * math.cos(fi / 3.0) - a / 3.0
    y2 = fak * math.cos(fi / 3.0 + 4.0 / 3.0 * math.pi) - a / 3.0
    uplus = (y1 - xm) * math.exp(t * math.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * math.exp(t * math.log(y2) - s * (y2 + 1.0 / y2) - nc)

    def propose(rng, m):
        u = uminus + rng.random(m) * (uplus - uminus)
        v = 1.0 - rng.random(m)
        x = u / v + xm
        ok = x > 0
        xs = np.where(ok, x, 1.0)
        ok &= np.log(v) <= t * np.log(xs) - s * (xs + 1.0 / xs) - nc
        return x, ok

    def propose_one(rng):
        while True:
            r = rng.random(2)
            v = 1.0 - r[1]
            x = (uminus + r[0] * (uplus - uminus)) / v + xm
            if x > 0 and math.log(v) <= t * math.log(x) - s * (x + 1.0 / x) - nc:
                return x

    propose.one = propose_one
    return propose


def _rou_noshift(lam, omega):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + math.sqrt((lam + 1.0) ** 2 + omega * omega)) / omega
    um = math.exp(0.5 * (lam + 1.0) * math.log(ym) - s * (ym + 1.0 / ym) - nc)

    def propose(rng, m):
        u = um * rng.random(m)
        v = 1.0 - rng.random(m)
        x = u / v
        ok = x > 0
        xs = np.where(ok, x, 1.0)
        ok &= np.log(v) <= t * np.log(xs) - s * (xs + 1.0 / xs) - nc
        return x, ok

    return propose


def _rejection_small_omega(lam, omega):
    # three-piece hat for 0 <= lam < 1 and small omega (Hormann & Leydold 2014)
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = math.exp((lam - 1.0) * math.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    a0 = k0 * x0
    if x0 >= 2.0 / omega:
        k1 = 0.0
        a1 = 0.0
        k2 = x0 ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-omega * x0 / 2.0) / omega
    else:
        k1 = math.exp(-omega)
        # (b^lam - x0^lam) / lam written to stay accurate as lam -> 0
        span = math.log(2.0 / (omega * x0))
        ls = lam * span
        a1 = k1 * x0 ** lam * (span * (1.0 + 0.5 * ls) if ls < 1e-8 else math.expm1(ls) / lam)
        k2 = (2.0 / omega) ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-1.0) / omega
    total = a0 + a1 + a2
    edge = max(x0, 2.0 / omega)

    def propose(rng, m):
        v = total * rng.random(m)
        x = np.empty(m)
        hx = np.empty(m)
        p0 = v <= a0
        x[p0] = x0 * v[p0] / a0
        hx[p0] = k0
        v1 = v - a0
        p1 = ~p0 & (v1 <= a1)
        if p1.any():
            r = v1[p1] / (k1 * x0 ** lam)
            lr = r * (1.0 - 0.5 * lam * r) if lam * r.max() < 1e-8 else np.log1p(lam * r) / lam
            x[p1] = x0 * np.exp(lr)
            hx[p1] = k1 * x[p1] ** (lam - 1.0)
        p2 = ~p0 & ~p1
        if p2.any():
            v2 = v1[p2] - a1
            arg = np.maximum(math.exp(-omega / 2.0 * edge) - omega / (2.0 * k2) * v2, 1e-300)
            x[p2] = -2.0 / omega * np.log(arg)
            hx[p2] = k2 * np.exp(-omega / 2.0 * x[p2])
        u = rng.random(m) * hx
        with np.errstate(divide="ignore"):
            ok = np.log(u) <= (lam - 1.0) * np.log(x) - omega / 2.0 * (x + 1.0 / x)
        return x, ok

    return propose


def sample_gig(q, a, b, rng, size=None):
    """Draw from the generalized inverse Gaussian GIG(q, a, b).

    Uses the ratio-of-uniforms family of Hörmann & Leydold (2014), which is
    uniformly fast over all parameter values, including the large negative
    orders that arise in long time windows.

    Parameters
    ----------
    q : float
        Order (any real).
    a, b : float
        Positive coefficients of ``x`` and ``1/x`` in the exponent.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws; a Python float is returned when omitted.
    """
    GigParams(q, a, b)
    lam = abs(q)
    omega = math.sqrt(a * b)
    alpha = math.sqrt(b / a)

    if lam > 2.0 or omega > 3.0:
        propose = _rou_shift(lam, omega)
    elif lam >= 1.0 - 2.25 * omega * omega or omega > 0.2:
        propose = _rou_noshift(lam, omega)
    else:
        propose = _rejection_small_omega(lam, omega)

    if size is None and hasattr(propose, "one"):
        x = propose.one(rng)
        return alpha / x if q < 0 else alpha * x

    m = 1 if size is None else int(size)
    out = np.empty(m)
    filled = 0
    batch = 2 if size is None else max(16, int(1.3 * m))
    while filled < m:
        x, ok = propose(rng, batch)
        got = x[ok][: m - filled]
        out[filled:filled + got.size] = got
        filled += got.size
    out = alpha / out if q < 0 else alpha * out
    return float(out[0]) if size is None else out


def _truncnorm_lower(lower, rng):
    """Standard normal draws conditioned on exceeding `lower` (array)."""
    lower = np.asarray(lower, dtype=float)
    out = np.empty(lower.shape)
    body = lower <= TAIL_SWITCH
    if body.any():
        u = 1.0 - rng.random(int(body.sum()))
        out[body] = -ndtri(u * ndtr(-lower[body]))
    tail = ~body
    if tail.any():
        a = lower[tail]
        rate = 0.5 * (a + np.sqrt(a * a + 4.0))
        res = np.empty(a.shape)
        todo = np.arange(a.size)
        while todo.size:
            z = a[todo] - np.log(1.0 - rng.random(todo.size)) / rate[todo]
            keep = rng.random(todo.size) <= np.exp(-0.5 * (z - rate[todo]) ** 2)
            res[todo[keep]] = z[keep]
            todo = todo[~keep]
        out[tail] = res
    return out


def sample_truncnorm(mean, positive, rng):
    """Draw N(mean, 1) restricted to (0, inf) where `positive`, else (-inf, 0).

    `mean` and `positive` broadcast against each other; a scalar pair gives a
    Python float.
    """
    mean_arr, pos_arr = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(positive, dtype=bool))
    sgn = np.where(pos_arr, 1.0, -1.0)
    w = _truncnorm_lower(-sgn * mean_arr, rng)
    x = mean_arr + sgn * w
    # guard the measure-zero boundary produced by rounding
    x = np.where(pos_arr, np.maximum(x, np.nextafter(0.0, 1.0)), np.minimum(x, -np.nextafter(0.0, 1.0)))
    return float(x) if x.ndim == 0 else x


def _acg_b(lams):
    q = lams.size
    if np.all(lams == 0.0):
        return float(q)

    def f(b):
        return np.sum(1.0 / (b + 2.0 * lams)) - 1.0

    return brentq(f, 1.0, float(q), xtol=1e-14, rtol=1e-14)


def sample_vector_bingham(h, rng, size=None):
    """Draw unit vectors x with density ∝ exp(x' h x) on the sphere.

    Exact rejection sampler with an angular central Gaussian envelope
    (Kent, Ganeiber & Mardia 2018); draws are independent, so no current
    state is needed.

    Parameters
    ----------
    h : (d, d) array_like
        Symmetric exponent matrix.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws; a single ``(d,)`` vector is returned when omitted.
    """
    h = np.asarray(h, dtype=float)
    h = 0.5 * (h + h.T)
    evals, evecs = np.linalg.eigh(h)
    # density exp(-y' A y) in the eigenbasis, A = diag(lams) >= 0 with min 0
    lams = np.maximum(evals[-1] - evals, 0.0)
    d = lams.size
    b = _acg_b(lams)
    omega = 1.0 + 2.0 * lams / b
    sd = 1.0 / np.sqrt(omega)
    log_m = -0.5 * (d - b) + 0.5 * d * math.log(d / b)

    m = 1 if size is None else int(size)
    out = np.empty((m, d))
    filled = 0
    batch = 4 if size is None else max(16, int(1.5 * m))
    while filled < m:
        y = rng.standard_normal((batch, d)) * sd
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        t = (y * y) @ lams
        log_ratio = -t + 0.5 * d * np.log1p(2.0 * t / b) - log_m
        ok = np.log(1.0 - rng.random(batch)) <= log_ratio
        got = y[ok][: m - filled]
        out[filled:filled + got.shape[0]] = got
        filled += got.shape[0]
    x = out @ evecs.T
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x[0] if size is None else x
