"""VAR layer: lagged designs, conjugate sufficient statistics, marginal
likelihood of the idiosyncratic covariance, and ridge hyperparameter choice.

With a matrix-normal prior A | Sigma ~ MN(A0, Sigma, Psi), Psi = I_k / eta,
the coefficients integrate out and the data enter the covariance posterior
only through

    S_xx = X'X + eta I,  S_yx = Y'X + eta A0,  S_yy = Y'Y + eta A0 A0',
    S_y|x = S_yy - S_yx S_xx^-1 S_yx'.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import cholesky, logdet_chol, solve_triangular
from .exceptions import NumericalError, ValidationError

LAG_MODES = ("lag0", "lag1")


@dataclass
class TimeSeriesPanel:
    """T x n endogenous series, T x m market indicators and their axis."""

    y: np.ndarray
    m: np.ndarray = None
    dates: list = None
    labels: list = None
    standardized: bool = False

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        t, n = self.y.shape
        if self.m is None:
            self.m = np.zeros((t, 0))
        self.m = np.asarray(self.m, dtype=float).reshape(t, -1)
        if self.dates is None:
            self.dates = list(range(t))
        if self.labels is None:
            self.labels = [f"y{i + 1}" for i in range(n)]
        if len(self.dates) != t or len(self.labels) != n:
            raise ValidationError("dates/labels do not match the data shape")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.m))):
            raise ValidationError("panel contains missing or non-finite values")

    @property
    def n(self):
        return self.y.shape[1]

    @property
    def T(self):
        return self.y.shape[0]

    def window(self, start, stop):
        return TimeSeriesPanel(self.y[start:stop], self.m[start:stop], self.dates[start:stop],
                               list(self.labels), self.standardized)


def _zscore(a):
    if a.shape[1] == 0:
        return a
    sd = a.std(axis=0)
    sd[sd == 0] = 1.0
    return (a - a.mean(axis=0)) / sd


def standardize(panel):
    """Return a copy with every column of Y and M at zero mean, unit variance.

    Constant columns are centered but left unscaled.
    """
    return TimeSeriesPanel(_zscore(panel.y), _zscore(panel.m), list(panel.dates),
                           list(panel.labels), standardized=True)


def build_lagged_design(panel, lag_mode):
    """Return ``(Y_eff, X)`` for the contemporaneous or one-lag model.

    lag1 pairs Y_t with X_t = (Y_{t-1}, M_{t-1}), so T_eff = T - 1 and
    k = n + m; lag0 has no predictors (k = 0, T_eff = T).
    """
    if lag_mode not in LAG_MODES:
        raise ValidationError(f"lag_mode must be one of {LAG_MODES}, got {lag_mode!r}")
    y = panel.y
    if lag_mode == "lag0":
        if panel.T < 1:
            raise ValidationError("need at least one observation")
        return y.copy(), np.zeros((panel.T, 0))
    if panel.T < 2:
        raise ValidationError("lag1 design needs T >= 2")
    x = np.hstack([y[:-1], panel.m[:-1]])
    return y[1:].copy(), x


@dataclass
class SufficientStats:
    s_xx: np.ndarray
    s_yx: np.ndarray
    s_yy: np.ndarray
    s_y_given_x: np.ndarray
    T_eff: int
    k: int
    eta: float = 0.0
    _chol_xx: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.s_yy.shape[0]


def compute_suffstats(y_eff, x, eta=1.0, prior_mean=None):
    """Sufficient statistics of the conjugate VAR with Psi = I_k / eta.

    The Schur complement is formed from a Cholesky factor of S_xx; no
    explicit inverse is taken.
    """
    y_eff = np.asarray(y_eff, dtype=float)
    x = np.asarray(x, dtype=float).reshape(y_eff.shape[0], -1)
    t_eff, n = y_eff.shape
    k = x.shape[1]
    s_yy = y_eff.T @ y_eff
    if k == 0:
        s = 0.5 * (s_yy + s_yy.T)
        return SufficientStats(np.zeros((0, 0)), np.zeros((n, 0)), s_yy, s, t_eff, 0, 0.0,
                               np.zeros((0, 0)))
    if not eta > 0:
        raise ValidationError("eta must be positive when the design has predictors")
    s_xx = x.T @ x + eta * np.eye(k)
    s_yx = y_eff.T @ x
    if prior_mean is not None:
        a0 = np.asarray(prior_mean, dtype=float).reshape(n, k)
        s_yx = s_yx + eta * a0
        s_yy = s_yy + eta * a0 @ a0.T
    try:
        l_xx = np.linalg.cholesky(s_xx)
    except np.linalg.LinAlgError:
        raise NumericalError(f"S_xx is singular (smallest eigenvalue {np.linalg.eigvalsh(s_xx).min():.3g})") from None
    r = solve_triangular(l_xx, s_yx.T, lower=True)
    s = s_yy - r.T @ r
    s = 0.5 * (s + s.T)
    return SufficientStats(s_xx, s_yx, s_yy, s, t_eff, k, float(eta), l_xx)


def log_marginal_likelihood(stats, sigma):
    """log P(Y | Sigma) with A integrated out, constants included."""
    n, t = stats.n, stats.T_eff
    l_sig = cholesky(sigma, jitter=False, what="Sigma")
    logdet_sig = logdet_chol(l_sig)
    w = solve_triangular(l_sig, stats.s_y_given_x, lower=True)
    w = solve_triangular(l_sig, w.T, lower=True)
    tr = np.trace(w)
    out = -0.5 * n * t * math.log(2.0 * math.pi) - 0.5 * t * logdet_sig - 0.5 * tr
    if stats.k > 0:
        # log|Psi| = -k log(eta)
        out += 0.5 * n * stats.k * math.log(stats.eta) - 0.5 * n * logdet_chol(stats._chol_xx)
    return float(out)


def posterior_mean_A(stats):
    """Posterior mean S_yx S_xx^-1 (n x k)."""
    if stats.k == 0:
        return np.zeros((stats.n, 0))
    l = stats._chol_xx
    z = solve_triangular(l, stats.s_yx.T, lower=True)
    return solve_triangular(l.T, z, lower=False).T


def ridge_coefficients(y, x, eta):
    """(X'X + eta I)^-1 X'Y, i.e. the transposed posterior mean of A."""
    return posterior_mean_A(compute_suffstats(y, x, eta)).T


@dataclass
class RidgeChoice:
    c0: float
    eta: float
    msfe_curve: list


DEFAULT_C0_GRID = tuple(float(v) for v in np.round(np.geomspace(0.1, 10.0, 9), 6))


def select_ridge(panel, lag_mode="lag1", grid=DEFAULT_C0_GRID, split=0.8, tol=0.01):
    """Choose the ridge scale c0 (eta = c0 k) on a train/holdout split.

    For every grid value the posterior-mean coefficients are fitted on the
    first ``split`` share of rows and the mean squared one-step forecast
    error (over holdout rows and series) recorded. The smallest c0 whose
    next first difference of the MSFE is below `tol` in absolute value is
    returned; when none is, the grid midpoint.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValidationError("empty c0 grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("c0 grid must be strictly ascending")
    if not 0.0 < split < 1.0:
        raise ValidationError("split must lie in (0, 1)")
    y, x = build_lagged_design(panel, lag_mode)
    k = x.shape[1]
    if k == 0:
        raise ValidationError("ridge selection needs predictors (lag1)")
    n_train = int(math.floor(split * y.shape[0]))
    if y.shape[0] - n_train < 1 or n_train < 1:
        raise ValidationError("holdout must contain at least one row")
    y_tr, x_tr, y_te, x_te = y[:n_train], x[:n_train], y[n_train:], x[n_train:]
    curve = []
    for c0 in grid:
        coef = ridge_coefficients(y_tr, x_tr, c0 * k)
        curve.append((c0, float(np.mean((y_te - x_te @ coef) ** 2))))
    chosen = grid[len(grid) // 2] if len(grid) > 1 else grid[0]
    for i in range(len(grid) - 1):
        if abs(curve[i + 1][1] - curve[i][1]) < tol:
            chosen = grid[i]
            break
    return RidgeChoice(chosen, chosen * k, curve)


def structural_decomposition(sigma, parents):
    """Regression coefficients B and innovation variances Q given parent sets.

    Row i of B holds Sigma_{i,pa} Sigma_{pa,pa}^-1 on the parent columns and
    Q[i] the residual variance of that regression.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    b = np.zeros((n, n))
    q = np.empty(n)
    for i in range(n):
        pa = np.asarray(sorted(parents[i]), dtype=int)
        if pa.size and (pa.min() < 0 or pa.max() >= n or i in pa):
            raise ValidationError(f"invalid parent set for node {i}")
        if pa.size == 0:
            q[i] = sigma[i, i]
            continue
        l = cholesky(sigma[np.ix_(pa, pa)], jitter=False, what=f"Sigma[pa({i}), pa({i})]")
        z = solve_triangular(l, sigma[pa, i], lower=True)
        b[i, pa] = solve_triangular(l.T, z, lower=False)
        q[i] = sigma[i, i] - z @ z
    return b, q


def reconstruct_sigma(b, q):
    """(I - B)^-1 diag(Q) (I - B)^-T."""
    n = b.shape[0]
    inv = np.linalg.inv(np.eye(n) - b)
    return inv @ np.diag(q) @ inv.T
