"""Gibbs sampler orchestration, chain traces and posterior summaries.

One sweep runs, in order,

    [Sigma | G, Y], [G | Sigma, U, Lambda, theta], [Z | G, U, Lambda, theta],
    [theta | Z, U, Lambda], [Lambda | Z, U, theta], [U | Z, Lambda, theta]

with the G step collapsed over Z (edge probabilities come from the link
function, not from the current Z). The SSSL baseline is the same sampler
with a constant edge prior and no latent block.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import cgm, lpm
from ._linalg import cholesky, logdet_chol, solve_triangular
from .analysis import network_density, orthogonal_align
from .exceptions import NumericalError, ValidationError
from .rng import DEFAULT_SEED, rng_stream
from .var import DEFAULT_C0_GRID, build_lagged_design, compute_suffstats, select_ridge, standardize

log = logging.getLogger(__name__)

MODES = {
    "bcglpm0": ("bcglpm", "lag0"),
    "bcglpm1": ("bcglpm", "lag1"),
    "sssl": ("sssl", "lag0"),
}


@dataclass
class FitConfig:
    n_iter: int = 10000
    burn_in: int = 3000
    n_chains: int = 2
    lag_mode: str = "lag1"
    model: str = "bcglpm"
    v0: float = 0.02
    h: float = 50.0
    theta0: float = -0.5
    tau_theta_sq: float = 100.0
    tau_lambda_sq: float = None
    c0_grid: tuple = DEFAULT_C0_GRID
    c0: float = None  # fixed ridge scale; skips selection when set
    ridge_split: float = 0.8
    ridge_tol: float = 0.01
    seed: int = DEFAULT_SEED
    thin: int = 10
    check_every: int = 100
    standardize: bool = True
    fast_inverse: bool = True
    random_scan: bool = False
    u_updates: int = 2
    jobs: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise ValidationError("need 0 <= burn_in < n_iter")
        if self.n_chains < 1:
            raise ValidationError("need at least one chain")
        if self.model not in ("bcglpm", "sssl"):
            raise ValidationError(f"unknown model {self.model!r}")
        if self.lag_mode not in ("lag0", "lag1"):
            raise ValidationError(f"unknown lag_mode {self.lag_mode!r}")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        self.c0_grid = tuple(float(c) for c in self.c0_grid)

    @classmethod
    def for_mode(cls, mode, **kw):
        if mode not in MODES:
            raise ValidationError(f"mode must be one of {sorted(MODES)}, got {mode!r}")
        model, lag = MODES[mode]
        return cls(model=model, lag_mode=lag, **kw)

    @property
    def mode(self):
        if self.model == "sssl":
            return "sssl"
        return "bcglpm0" if self.lag_mode == "lag0" else "bcglpm1"

    @property
    def spike(self):
        return cgm.SpikeSlab(self.v0, self.h)

    @property
    def hyper(self):
        return lpm.LpmHyper(self.theta0, self.tau_theta_sq, self.tau_lambda_sq)

    def to_dict(self):
        d = asdict(self)
        d["c0_grid"] = list(self.c0_grid)
        return d


@dataclass
class ChainTrace:
    scores: np.ndarray
    edge_counts: np.ndarray
    n_retained: int
    theta_samples: np.ndarray
    lambda_samples: np.ndarray
    density_samples: np.ndarray
    u_samples: np.ndarray = field(repr=False, default=None)
    u_last: np.ndarray = None
    u_mean_aligned: np.ndarray = None
    n_reortho: int = 0


@dataclass
class PosteriorSummary:
    edge_prob: np.ndarray
    median_graph: np.ndarray
    theta_mean: float
    lambda_mean: np.ndarray
    u_hat: np.ndarray
    psrf: float
    density_posterior_mean: float
    ridge: object = None
    mode: str = "bcglpm1"


def score(cov, latent, stats):
    """-2 log L: T log|Sigma| + tr(S Sigma^-1) + 0.5 ||E_z - U Lambda U'||^2 (off-diagonal)."""
    l = cholesky(cov.sigma, jitter=False, what="Sigma")
    w = solve_triangular(l, np.eye(l.shape[0]), lower=True)
    val = stats.T_eff * logdet_chol(l) + float(np.sum((w @ stats.s_y_given_x) * w))
    if latent is not None:
        r = lpm.e_z(latent) - lpm.low_rank(latent.u, latent.lam)
        np.fill_diagonal(r, 0.0)
        val += 0.5 * float(np.sum(r * r))
    return val


def gibbs_sweep(cov, latent, stats, spike, hyper, rng, edge_prior=None,
                fast_inverse=True, order=None, u_updates=2):
    """One full Gibbs cycle; mutates and returns ``(cov, latent)``.

    With ``latent=None`` the constant `edge_prior` replaces the link
    probabilities and the latent block is skipped (SSSL).
    """
    cgm.sweep_sigma(cov, stats, spike, rng, order=order, fast_inverse=fast_inverse)
    gam = edge_prior if latent is None else lpm.link_probability(latent.theta, latent.lam, latent.u)
    cgm.update_graph(cov, spike, gam, rng)
    if latent is not None:
        lpm.update_z(latent, cov.graph, rng)
        lpm.update_theta(latent, hyper, rng)
        lpm.update_lambda(latent, hyper, rng)
        for _ in range(u_updates):
            lpm.update_u(latent, rng)
    return cov, latent


def run_chain(stats, config, chain_id=0, callback=None):
    """Run one chain of `config.n_iter` sweeps and return its ChainTrace."""
    rng = rng_stream(config.seed, chain_id)
    n = stats.n
    spike, hyper = config.spike, config.hyper
    cov = cgm.CovGraphState.initial(n)
    latent = None
    edge_prior = None
    if config.model == "sssl":
        edge_prior = cgm.sssl_edge_prior(n)
    else:
        latent = lpm.LatentState.initial(n, rng, hyper.theta0)

    scores = np.empty(config.n_iter)
    counts = np.zeros((n, n), dtype=np.int64)
    n_keep = config.n_iter - config.burn_in
    n_thin = len(range(0, n_keep, config.thin))
    thetas = np.full(n_thin, np.nan)
    lambdas = np.full((n_thin, lpm.RANK), np.nan)
    dens = np.empty(n_keep)
    us = np.full((n_thin, n, lpm.RANK), np.nan) if latent is not None else None

    for it in range(config.n_iter):
        order = rng.permutation(n) if config.random_scan else None
        gibbs_sweep(cov, latent, stats, spike, hyper, rng, edge_prior,
                    fast_inverse=config.fast_inverse, order=order, u_updates=config.u_updates)
        if config.check_every and (it + 1) % config.check_every == 0:
            cgm.check_state(cov)
            if latent is not None:
                lpm.check_state(latent, cov.graph)
        scores[it] = score(cov, latent, stats)
        if callback is not None:
            callback(it, cov, latent)
        k = it - config.burn_in
        if k < 0:
            continue
        counts += cov.graph
        dens[k] = network_density(cov.graph)
        if k % config.thin == 0:
            j = k // config.thin
            if latent is not None:
                thetas[j] = latent.theta
                lambdas[j] = latent.lam
                us[j] = latent.u

    if not np.all(np.isfinite(scores)):
        raise NumericalError("non-finite score in chain trace")
    trace = ChainTrace(scores, counts, n_keep, thetas, lambdas, dens, us)
    if latent is not None:
        trace.u_last = latent.u.copy()
        trace.u_mean_aligned = aligned_mean(us, us[-1])
        trace.n_reortho = latent.n_reortho
    return trace


def aligned_mean(u_samples, target):
    """Mean of configurations after rotating/reflecting each onto `target`."""
    return np.mean([orthogonal_align(target, u) for u in u_samples], axis=0)


def psrf(traces):
    """Potential scale reduction factor of equal-length scalar chains.

    sqrt(1 + B / (L W)) with B = L var(chain means) and W the mean of the
    within-chain population variances, so identical chains give exactly 1.
    """
    chains = [np.asarray(t, dtype=float) for t in traces]
    if len(chains) < 2:
        raise ValidationError("PSRF needs at least two chains")
    lengths = {c.size for c in chains}
    if len(lengths) != 1:
        raise ValidationError("chains must have equal length")
    length = lengths.pop()
    if length < 100:
        raise ValidationError("chains must have at least 100 draws")
    x = np.vstack(chains)
    means = x.mean(axis=1)
    w = x.var(axis=1).mean()
    b = length * means.var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else math.inf
    return float(math.sqrt(1.0 + b / (length * w)))


def prepare_stats(panel, config):
    """Standardize (optionally), choose the ridge scale and build statistics."""
    if config.standardize and not panel.standardized:
        panel = standardize(panel)
    y, x = build_lagged_design(panel, config.lag_mode)
    ridge = None
    eta = 0.0
    if x.shape[1] > 0:
        if config.c0 is not None:
            eta = config.c0 * x.shape[1]
        else:
            ridge = select_ridge(panel, config.lag_mode, config.c0_grid,
                                 config.ridge_split, config.ridge_tol)
            eta = ridge.eta
    return compute_suffstats(y, x, eta), ridge


def _run_chain_star(args):
    return run_chain(*args)


def summarize(traces, config, ridge=None):
    retained = sum(t.n_retained for t in traces)
    edge_prob = sum(t.edge_counts for t in traces) / retained
    edge_prob = 0.5 * (edge_prob + edge_prob.T)
    np.fill_diagonal(edge_prob, 0.0)
    median = (edge_prob > 0.5).astype(np.int8)
    if config.model == "sssl":
        theta_mean, lam_mean, u_hat = math.nan, np.full(lpm.RANK, np.nan), None
    else:
        theta_mean = float(np.mean(np.concatenate([t.theta_samples for t in traces])))
        lam_mean = np.mean(np.vstack([t.lambda_samples for t in traces]), axis=0)
        target = traces[0].u_mean_aligned
        u_hat = np.mean([orthogonal_align(target, t.u_mean_aligned) for t in traces], axis=0)
    burn = config.burn_in
    p = psrf([t.scores[burn:] for t in traces]) if len(traces) >= 2 else None
    dens = float(np.mean(np.concatenate([t.density_samples for t in traces])))
    return PosteriorSummary(edge_prob, median, theta_mean, lam_mean, u_hat, p, dens, ridge, config.mode)


def fit(panel, config):
    """Fit the model to one window; returns ``(PosteriorSummary, [ChainTrace])``."""
    stats, ridge = prepare_stats(panel, config)
    args = [(stats, config, c) for c in range(config.n_chains)]
    if config.jobs > 1 and config.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, config.n_chains)) as ex:
            traces = list(ex.map(_run_chain_star, args))
    else:
        traces = [run_chain(*a) for a in args]
    return summarize(traces, config, ridge), traces
