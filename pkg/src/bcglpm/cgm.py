"""Covariance graph updates: column-block Gibbs for Sigma and edge updates for G.

The prior on Sigma given G is a spike-and-slab on the off-diagonal entries
(N(0, v0^2) for non-edges, N(0, v1^2) for edges, one factor per unordered
pair) and Exp(1/2) on the diagonal, restricted to positive-definite
matrices. Conditioning on everything but column i, the Schur complement
gamma = sigma_ii - mu' Sigma_{-i}^-1 mu is GIG and mu = sigma_{-i} is Gaussian.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from scipy.special import expit

from ._linalg import spd_inverse, is_spd
from .exceptions import NumericalError, ValidationError
from .rng import sample_gig

log = logging.getLogger(__name__)

PROB_EPS = 1e-12


@dataclass(frozen=True)
class SpikeSlab:
    """Spike (v0) and slab (v1 = h * v0) standard deviations."""

    v0: float = 0.02
    h: float = 50.0

    def __post_init__(self):
        if not (self.v0 > 0 and self.h > 1):
            raise ValidationError("need v0 > 0 and h > 1")

    @property
    def v1(self):
        return self.h * self.v0

    def variances(self, graph):
        """V matrix: 1 on the diagonal, v1^2 on edges, v0^2 elsewhere."""
        v = np.where(graph.astype(bool), self.v1 ** 2, self.v0 ** 2)
        np.fill_diagonal(v, 1.0)
        return v


@dataclass
class CovGraphState:
    sigma: np.ndarray
    graph: np.ndarray

    @classmethod
    def initial(cls, n):
        return cls(np.eye(n), np.zeros((n, n), dtype=np.int8))

    def copy(self):
        return CovGraphState(self.sigma.copy(), self.graph.copy())


def _chol_lower(m, what):
    c, info = lapack.dpotrf(m, lower=1, clean=1)
    if info != 0:
        raise NumericalError(f"{what} is not positive definite")
    return c


def update_sigma_column(state, stats, spike, i, rng, sigma_inv=None):
    """Resample column/row i of Sigma in place and return the state.

    Draws gamma | mu from GIG(1 - T/2, v_ii, b) and then mu | gamma from
    N(W^-1 Sigma_{-i}^-1 s_{-i} / gamma, W^-1). When `sigma_inv` (the
    current inverse of Sigma) is given, Sigma_{-i}^-1 is obtained from it
    by a rank-one downdate instead of a fresh factorization, and it is kept
    in sync with the new column.

    All products are formed at full size n with Sigma_{-i}^-1 embedded as
    an n x n matrix whose row and column i are zero; entry i of the
    Gaussian draw is then decoupled and discarded.
    """
    sigma = state.sigma
    s = stats.s_y_given_x
    n = sigma.shape[0]
    v_ii = 1.0

    if sigma_inv is None:
        idx = np.r_[0:i, i + 1:n]
        a = np.zeros((n, n))
        a[np.ix_(idx, idx)] = spd_inverse(sigma[np.ix_(idx, idx)], what="Sigma_{-i}")
    else:
        w_i = sigma_inv[:, i]
        a = sigma_inv - np.outer(w_i / w_i[i], w_i)
        a[i, :] = 0.0
        a[:, i] = 0.0
    mu = sigma[:, i].copy()
    mu[i] = 0.0
    s_col = s[:, i]

    a_mu = a @ mu
    sa = s @ a
    b = a_mu @ (s @ a_mu) - 2.0 * (s_col @ a_mu) + s[i, i]
    if not b > 0:
        b_floor = max(np.finfo(float).eps * s[i, i], np.finfo(float).tiny)
        log.warning("GIG b=%.3g non-positive at column %d; clamped to %.3g", b, i, b_floor)
        b = b_floor
    gamma = sample_gig(1.0 - 0.5 * stats.T_eff, v_ii, b, rng)

    w = a @ sa
    w *= 1.0 / gamma
    w += v_ii * a
    d = np.where(state.graph[i] != 0, 1.0 / spike.v1 ** 2, 1.0 / spike.v0 ** 2)
    d[i] = 1.0
    w.flat[::n + 1] += d
    l = _chol_lower(w, f"precision of column {i}")
    z, _ = lapack.dtrtrs(l, (a @ s_col) * (1.0 / gamma), lower=1)
    z += rng.standard_normal(n)
    mu_new, _ = lapack.dtrtrs(l, z, lower=1, trans=1)
    mu_new[i] = 0.0

    a_mu = a @ mu_new
    sigma[:, i] = mu_new
    sigma[i, :] = mu_new
    sigma[i, i] = gamma + mu_new @ a_mu
    if sigma_inv is not None:
        np.add(a, np.outer(a_mu * (1.0 / gamma), a_mu), out=sigma_inv)
        sigma_inv[:, i] = -a_mu / gamma
        sigma_inv[i, :] = -a_mu / gamma
        sigma_inv[i, i] = 1.0 / gamma
    return state


def sweep_sigma(state, stats, spike, rng, order=None, fast_inverse=True):
    """Update every column of Sigma once (columns 0..n-1 unless `order`).

    With `fast_inverse` the inverse of Sigma is factorized once per sweep and
    then carried through the column updates by rank-one corrections;
    otherwise each Sigma_{-i} is refactorized.
    """
    n = state.sigma.shape[0]
    cols = range(n) if order is None else order
    sigma_inv = spd_inverse(state.sigma, what="Sigma") if fast_inverse else None
    for i in cols:
        update_sigma_column(state, stats, spike, i, rng, sigma_inv=sigma_inv)
    return state


def edge_inclusion_prob(sigma, spike, edge_probs):
    """Conditional P(G_ij = 1 | Sigma, Gamma) for all pairs, from log odds."""
    gam = np.clip(edge_probs, PROB_EPS, 1.0 - PROB_EPS)
    s2 = sigma * sigma
    logit = (np.log(gam) - np.log1p(-gam)
             + np.log(spike.v0) - np.log(spike.v1)
             + s2 / (2.0 * spike.v0 ** 2) - s2 / (2.0 * spike.v1 ** 2))
    p = np.clip(expit(logit), PROB_EPS, 1.0 - PROB_EPS)
    np.fill_diagonal(p, 0.0)
    return p


def update_graph(state, spike, edge_probs, rng):
    """Resample every edge G_ij = G_ji independently; mutates and returns state."""
    n = state.sigma.shape[0]
    p = edge_inclusion_prob(state.sigma, spike, edge_probs)
    iu = np.triu_indices(n, 1)
    draw = (rng.random(iu[0].size) < p[iu]).astype(np.int8)
    g = np.zeros((n, n), dtype=np.int8)
    g[iu] = draw
    state.graph = g + g.T
    return state


def sssl_edge_prior(n):
    """Constant edge-probability matrix pi = 2 / (n - 1) of the SSSL baseline."""
    if n < 2:
        raise ValidationError("need n >= 2")
    pi = min(max(2.0 / (n - 1), PROB_EPS), 1.0 - PROB_EPS)
    out = np.full((n, n), pi)
    np.fill_diagonal(out, 0.0)
    return out


def check_state(state):
    """Raise NumericalError if Sigma is not SPD or the graph is malformed."""
    g = state.graph
    if not np.array_equal(g, g.T) or np.any(np.diag(g) != 0):
        raise NumericalError("graph lost symmetry or gained a self-loop")
    if not is_spd(state.sigma):
        raise NumericalError("Sigma is not positive definite")
