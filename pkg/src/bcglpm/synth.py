"""Synthetic covariance-graph data with planted structure.

Lag-0:  Y_t = E_t,               E_t ~ N(0, Sigma_G)
Lag-1:  Y_t = A Y_{t-1} + E_t,   A = diag(alpha), Y_0 ~ N(0, I)

Sigma_G = B_G + delta I where B_G has unit diagonal and symmetric random
entries on the edges of an Erdos-Renyi graph, and
delta = (n min eig(B_G) - max eig(B_G)) / (1 - n).
"""

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from .exceptions import ValidationError
from .rng import DEFAULT_SEED, rng_stream

SETUPS = ("lag0", "lag1")


@dataclass
class DgpSpec:
    n: int
    T: int
    setup: str = "lag0"
    edge_prob: float = 0.2
    coef_low: float = 0.3
    coef_high: float = 0.9
    seed: int = DEFAULT_SEED
    discard: int = 0

    def __post_init__(self):
        if self.n < 2 or self.T < 1:
            raise ValidationError("need n >= 2 and T >= 1")
        if not 0.0 < self.edge_prob < 1.0:
            raise ValidationError("edge_prob must lie in (0, 1)")
        if self.setup not in SETUPS:
            raise ValidationError(f"setup must be one of {SETUPS}")
        if not 0.0 <= self.coef_low < self.coef_high:
            raise ValidationError("need 0 <= coef_low < coef_high")


@dataclass
class PlantedInstance:
    data: np.ndarray
    true_graph: np.ndarray
    sigma_true: np.ndarray
    a_true: np.ndarray = None
    spec: DgpSpec = None


def signed_uniform(rng, size, low=0.3, high=0.9):
    """Uniform draws on (-high, -low) ∪ (low, high)."""
    mag = rng.uniform(low, high, size)
    return np.where(rng.random(size) < 0.5, -mag, mag)


def eigen_shift(b):
    """delta making B + delta I positive definite per the planted-graph recipe."""
    ev = np.linalg.eigvalsh(b)
    n = b.shape[0]
    return (n * ev[0] - ev[-1]) / (1.0 - n)


def planted_covariance(n, rng, edge_prob=0.2, low=0.3, high=0.9):
    """Return ``(graph, Sigma_G)``; degenerate equal-eigenvalue draws are redrawn."""
    iu = np.triu_indices(n, 1)
    while True:
        g = np.zeros((n, n), dtype=np.int8)
        g[iu] = rng.random(iu[0].size) < edge_prob
        g = g + g.T
        b = np.eye(n)
        vals = signed_uniform(rng, iu[0].size, low, high) * g[iu]
        b[iu] = vals
        b[(iu[1], iu[0])] = vals
        ev = np.linalg.eigvalsh(b)
        if ev[-1] - ev[0] > 1e-9:
            break
    return g, b + eigen_shift(b) * np.eye(n)


def generate(spec):
    """Draw a PlantedInstance from `spec`."""
    rng = rng_stream(spec.seed, 0)
    g, sigma = planted_covariance(spec.n, rng, spec.edge_prob, spec.coef_low, spec.coef_high)
    chol = np.linalg.cholesky(sigma)
    total = spec.T + (spec.discard if spec.setup == "lag1" else 0)
    e = rng.standard_normal((total, spec.n)) @ chol.T
    a = None
    if spec.setup == "lag0":
        y = e
    else:
        a = signed_uniform(rng, spec.n, spec.coef_low, spec.coef_high)
        y = np.empty_like(e)
        prev = rng.standard_normal(spec.n)
        for t in range(total):
            prev = a * prev + e[t]
            y[t] = prev
        y = y[spec.discard:]
    return PlantedInstance(y, g, sigma, a, spec)


def cell_seed(seed, n, mult, setup, rep):
    ss = np.random.SeedSequence([int(seed), int(n), int(mult), SETUPS.index(setup), int(rep)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def replicate_benchmark(n_list, t_multipliers=(2, 10), setups=SETUPS, reps=10,
                        seed=DEFAULT_SEED, out_dir=None):
    """Enumerate (and optionally write) the simulation grid.

    Returns the manifest: one dict per instance with its design cell and
    seed, plus file paths when `out_dir` is given.
    """
    from .pipeline import write_series_csv, write_truth

    manifest = []
    for n in n_list:
        for mult in t_multipliers:
            for setup in setups:
                for rep in range(reps):
                    entry = dict(n=int(n), T=int(mult * n), t_multiplier=int(mult), setup=setup,
                                 rep=rep, seed=cell_seed(seed, n, mult, setup, rep))
                    if out_dir is not None:
                        name = f"n{n}_T{mult}n_{setup}_rep{rep:02d}"
                        inst = generate(DgpSpec(n, mult * n, setup, seed=entry["seed"]))
                        data_path = os.path.join(out_dir, name + ".csv")
                        truth_path = os.path.join(out_dir, name + ".truth.json")
                        os.makedirs(out_dir, exist_ok=True)
                        write_series_csv(data_path, inst.data, list(range(inst.data.shape[0])),
                                         [f"y{i + 1}" for i in range(n)])
                        write_truth(truth_path, inst)
                        entry.update(data=os.path.basename(data_path), truth=os.path.basename(truth_path))
                    manifest.append(entry)
    if out_dir is not None:
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(dict(seed=int(seed), instances=manifest), fh, indent=1)
    return manifest


def spec_dict(spec):
    return asdict(spec)


def toy_prices(n_firms=8, n_market=2, T=300, seed=DEFAULT_SEED, start="2002-01-02"):
    """Small price panel with two sectors of firms plus market indexes.

    Firms in the same sector share a return factor and a volatility
    factor, so their log squared returns are visibly correlated. Returns
    ``(dates, labels, prices)``; market columns come last (MKT1, MKT2, ...)
    and dates are consecutive weekdays.
    """
    import datetime as dt

    rng = rng_stream(seed, 7)
    n = n_firms + n_market
    sector = np.arange(n) % 2
    sector[n_firms:] = 2
    phi = rng.uniform(0.5, 0.9, n)
    h = np.zeros(n)
    logp = np.full(n, np.log(100.0))
    prices = np.empty((T, n))
    for t in range(T):
        f_vol, f_ret = rng.standard_normal(3), rng.standard_normal(3)
        h = phi * h + 0.25 * f_vol[sector] + 0.1 * rng.standard_normal(n)
        eps = 0.85 * f_ret[sector] + 0.5 * rng.standard_normal(n)
        logp = logp + np.exp(h) * eps / 100.0
        prices[t] = np.exp(logp)
    day = dt.date.fromisoformat(start)
    dates = []
    while len(dates) < T:
        if day.weekday() < 5:
            dates.append(day.isoformat())
        day += dt.timedelta(days=1)
    labels = [f"FIRM{i + 1:02d}" for i in range(n_firms)] + [f"MKT{i + 1}" for i in range(n_market)]
    return dates, labels, prices
