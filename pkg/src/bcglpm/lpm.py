"""Latent position (eigenmodel) updates.

Edges follow G_ij = 1(Z_ij > 0) with Z_ij = theta + (U Lambda U')_ij + xi_ij,
xi_ij ~ N(0, 1), U an n x 2 matrix with orthonormal columns and
Lambda = diag(lambda_1, lambda_2). E_z denotes Z - theta with the diagonal
set to zero.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .exceptions import NumericalError
from .rng import sample_truncnorm, sample_vector_bingham

RANK = 2
ORTHO_TOL = 1e-8
PROB_EPS = 1e-12


@dataclass
class LpmHyper:
    theta0: float = -0.5
    tau_theta_sq: float = 100.0
    tau_lambda_sq: float = None  # defaults to n

    def lambda_var(self, n):
        return float(n) if self.tau_lambda_sq is None else self.tau_lambda_sq


@dataclass
class LatentState:
    z: np.ndarray
    theta: float
    lam: np.ndarray
    u: np.ndarray
    n_reortho: int = field(default=0)

    @classmethod
    def initial(cls, n, rng, theta0=-0.5):
        q, _ = np.linalg.qr(rng.standard_normal((n, RANK)))
        return cls(np.zeros((n, n)), float(theta0), np.zeros(RANK), q)

    def copy(self):
        return LatentState(self.z.copy(), self.theta, self.lam.copy(), self.u.copy(), self.n_reortho)

    @property
    def n(self):
        return self.u.shape[0]


def low_rank(u, lam):
    """U diag(lam) U'."""
    return (u * lam) @ u.T


def link_probability(theta, lam, u):
    """Gamma_ij = Phi(theta + (U Lambda U')_ij), clamped into (0, 1); zero diagonal."""
    g = np.clip(ndtr(theta + low_rank(u, lam)), PROB_EPS, 1.0 - PROB_EPS)
    np.fill_diagonal(g, 0.0)
    return g


def e_z(state):
    e = state.z - state.theta
    np.fill_diagonal(e, 0.0)
    return e


def update_z(state, graph, rng):
    """Draw every Z_ij (i < j) from its prior truncated to the side set by G_ij."""
    n = state.n
    iu = np.triu_indices(n, 1)
    mean = state.theta + low_rank(state.u, state.lam)[iu]
    draw = sample_truncnorm(mean, graph[iu] > 0, rng)
    z = np.zeros((n, n))
    z[iu] = draw
    state.z = z + z.T
    return state


def theta_posterior(state, hyper):
    """Mean and variance of theta | Z, U, Lambda."""
    n = state.n
    tau = hyper.tau_theta_sq
    var = 2.0 * tau / (2.0 + n * (n - 1) * tau)
    resid = state.z - low_rank(state.u, state.lam)
    total = resid[np.triu_indices(n, 1)].sum()
    return var * (total + hyper.theta0 / tau), var


def update_theta(state, hyper, rng):
    mean, var = theta_posterior(state, hyper)
    state.theta = float(mean + np.sqrt(var) * rng.standard_normal())
    return state


def lambda_posterior(state, hyper):
    """Means (length 2) and common variance of lambda_r | Z, theta, U."""
    tau = hyper.lambda_var(state.n)
    ez = e_z(state)
    quad = np.einsum("ir,ij,jr->r", state.u, ez, state.u)
    return tau / (2.0 + tau) * quad, 2.0 * tau / (2.0 + tau)


def update_lambda(state, hyper, rng):
    mean, var = lambda_posterior(state, hyper)
    state.lam = mean + np.sqrt(var) * rng.standard_normal(RANK)
    return state


def complement_basis(w):
    """Orthonormal n x (n-1) basis of the orthogonal complement of vector w.

    Built from the Householder reflection taking w to a multiple of e_1.
    """
    w = np.asarray(w, dtype=float)
    nrm = np.linalg.norm(w)
    if not nrm > 0:
        raise NumericalError("cannot complement a zero vector")
    w = w / nrm
    v = w.copy()
    v[0] += 1.0 if w[0] >= 0 else -1.0
    hh = np.eye(w.size) - 2.0 * np.outer(v, v) / (v @ v)
    return hh[:, 1:]


def _reorthonormalize(state):
    err = np.abs(state.u.T @ state.u - np.eye(RANK)).max()
    if err > ORTHO_TOL:
        q, r = np.linalg.qr(state.u)
        state.u = q * np.sign(np.diag(r))
        state.n_reortho += 1


def update_u(state, rng, column=None):
    """Resample one column of U from its Bingham-von Mises-Fisher conditional.

    The column r (drawn uniformly unless given) is confined to the orthogonal
    complement N of the other column, where its coordinates x = N'U_r have
    density ∝ exp(x' [lambda_r N'(E_z / 2) N] x).
    """
    r = int(rng.integers(RANK)) if column is None else int(column)
    other = state.u[:, 1 - r]
    basis = complement_basis(other)
    h = state.lam[r] * (basis.T @ (0.5 * e_z(state)) @ basis)
    x = sample_vector_bingham(h, rng)
    state.u = state.u.copy()
    state.u[:, r] = basis @ x
    _reorthonormalize(state)
    return state


def check_state(state, graph=None):
    """Raise NumericalError on broken orthonormality or Z/graph sign mismatch."""
    if np.abs(state.u.T @ state.u - np.eye(RANK)).max() > 1e-10:
        raise NumericalError("U lost orthonormality")
    if not np.array_equal(state.z, state.z.T):
        raise NumericalError("Z lost symmetry")
    if graph is not None:
        n = state.n
        iu = np.triu_indices(n, 1)
        zu, gu = state.z[iu], graph[iu] > 0
        if np.any(zu[gu] <= 0) or np.any(zu[~gu] >= 0):
            raise NumericalError("Z signs disagree with the graph")
