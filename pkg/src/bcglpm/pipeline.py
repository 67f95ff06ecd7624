"""File I/O and the rolling-window driver.

Input CSVs carry an ISO date (or any label) in the first column and one
instrument per remaining column. Outputs are plain CSV/JSON meant for
plotting elsewhere.
"""

import csv
import datetime as dt
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (clustering_coefficient, network_density, positive_periods,
                       procrustes, standardize_series)
from .exceptions import NumericalError, ValidationError
from .mcmc import FitConfig, fit
from .var import TimeSeriesPanel

log = logging.getLogger(__name__)

RV_FLOOR = 1e-12
MISSING = {"", "na", "nan", "null", "#n/a"}


def fmt(x):
    """17 significant digits; nan/inf spelled the way float() reads them back."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class PriceCsv:
    dates: list
    labels: list
    prices: np.ndarray
    dropped: int = 0


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ValidationError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ValidationError(f"{path}: need a date column and at least one series")
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ValidationError(f"{path}: row {k} has {len(r)} fields, header has {len(header)}")
    return header, rows[1:]


def _parse_table(path, parse_date=True):
    """Shared reader; returns (dates, labels, values, dropped). Row numbers are 1-based file lines."""
    header, rows = _read_rows(path)
    dates, values, dropped = [], [], 0
    prev = None
    for k, r in enumerate(rows, start=2):
        cells = [c.strip() for c in r]
        if any(c.lower() in MISSING for c in cells[1:]):
            dropped += 1
            continue
        if parse_date:
            try:
                d = dt.date.fromisoformat(cells[0])
            except ValueError:
                raise ValidationError(f"{path}: row {k}: malformed date {cells[0]!r}") from None
            if prev is not None and d <= prev:
                raise ValidationError(f"{path}: row {k}: dates not strictly increasing")
            prev = d
        else:
            d = cells[0]
        try:
            vals = [float(c) for c in cells[1:]]
        except ValueError as e:
            raise ValidationError(f"{path}: row {k}: {e}") from None
        dates.append(d)
        values.append(vals)
    if dropped:
        log.info("%s: dropped %d row(s) with missing values", path, dropped)
    if not values:
        raise ValidationError(f"{path}: no complete rows")
    return dates, header[1:], np.array(values, dtype=float), dropped


def ingest_prices(path):
    """Read a date,price,... CSV. Rows with a blank or NA cell are dropped."""
    dates, labels, prices, dropped = _parse_table(path)
    bad = np.argwhere(~(prices > 0) | ~np.isfinite(prices))
    if bad.size:
        r, c = bad[0]
        raise ValidationError(f"{path}: non-positive or non-finite price {prices[r, c]!r} "
                              f"in column {labels[c]!r} on {dates[r]}")
    return PriceCsv(dates, labels, prices, dropped)


def realized_volatility(prices, log_rv=True, market=()):
    """Squared 100x log returns; optionally log(max(RV, 1e-12)).

    `market` names columns that go to the market block M instead of Y.
    """
    p = prices.prices
    if p.shape[0] < 2:
        raise ValidationError("need at least two price rows")
    if np.any(p <= 0):
        raise ValidationError("prices must be positive")
    rv = (100.0 * np.diff(np.log(p), axis=0)) ** 2
    if log_rv:
        rv = np.log(np.maximum(rv, RV_FLOOR))
    return split_market(rv, prices.dates[1:], prices.labels, market)


def split_market(values, dates, labels, market=()):
    market = list(market)
    unknown = set(market) - set(labels)
    if unknown:
        raise ValidationError(f"unknown market column(s): {sorted(unknown)}")
    mi = [labels.index(c) for c in market]
    yi = [i for i in range(len(labels)) if i not in mi]
    if not yi:
        raise ValidationError("no endogenous series left after removing market columns")
    return TimeSeriesPanel(values[:, yi], values[:, mi], list(dates), [labels[i] for i in yi])


def read_series_csv(path, market=()):
    """Read an already-transformed panel (first column is an arbitrary label)."""
    dates, labels, values, _ = _parse_table(path, parse_date=False)
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{path}: non-finite values")
    return split_market(values, dates, labels, market)


def write_series_csv(path, data, index, columns, index_name="date"):
    data = np.asarray(data, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([index_name] + list(columns))
        for key, row in zip(index, data):
            w.writerow([str(key)] + [fmt(v) for v in row])


def write_truth(path, inst):
    spec = inst.spec
    payload = dict(graph=inst.true_graph.tolist(), sigma=inst.sigma_true.tolist(),
                   a=None if inst.a_true is None else inst.a_true.tolist(),
                   spec=None if spec is None else dict(vars(spec)))
    with open(path, "w") as fh:
        json.dump(payload, fh)


def read_truth(path):
    with open(path) as fh:
        d = json.load(fh)
    return np.asarray(d["graph"], dtype=np.int8), d


@dataclass
class WindowPlan:
    T: int
    window_len: int = 252
    step: int = 21
    ranges: list = field(init=False)

    def __post_init__(self):
        if self.window_len < 2 or self.step < 1:
            raise ValidationError("need window_len >= 2 and step >= 1")
        if self.window_len > self.T:
            raise ValidationError(f"window length {self.window_len} exceeds sample size {self.T}")
        count = (self.T - self.window_len) // self.step + 1
        self.ranges = [(k * self.step, k * self.step + self.window_len) for k in range(count)]

    def __len__(self):
        return len(self.ranges)


@dataclass
class RunConfig:
    fit: FitConfig
    input: str = None
    market: tuple = ()
    out_dir: str = "out"
    input_kind: str = "prices"
    log_rv: bool = True
    window_len: int = 252
    step: int = 21

    def __post_init__(self):
        self.market = tuple(self.market)
        if self.input_kind not in ("prices", "series"):
            raise ValidationError("input_kind must be 'prices' or 'series'")


def load_panel(run):
    if run.input_kind == "prices":
        return realized_volatility(ingest_prices(run.input), run.log_rv, run.market)
    return read_series_csv(run.input, run.market)


def emit_outputs(summary, traces, out_dir, config, labels=None, extra=None):
    """Write edges.csv, latent.csv (BCGLPM only), summary.json and trace.csv.

    trace.csv holds the score trace of the first chain; the remaining
    chains enter only through the PSRF in summary.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    p = summary.edge_prob
    n = p.shape[0]
    labels = list(labels) if labels is not None else [f"y{i + 1}" for i in range(n)]
    with open(os.path.join(out_dir, "edges.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "edge_prob", "median_edge"])
        for i in range(n):
            for j in range(i + 1, n):
                w.writerow([i, j, fmt(p[i, j]), int(summary.median_graph[i, j])])
    if summary.u_hat is not None:
        with open(os.path.join(out_dir, "latent.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "label", "u1", "u2"])
            for i in range(n):
                w.writerow([i, labels[i], fmt(summary.u_hat[i, 0]), fmt(summary.u_hat[i, 1])])
    with open(os.path.join(out_dir, "trace.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "score"])
        for k, s in enumerate(traces[0].scores):
            w.writerow([k + 1, fmt(s)])

    def num(x):
        return None if x is None or not math.isfinite(x) else float(x)

    info = dict(
        mode=summary.mode,
        seed=int(config.seed),
        version=__version__,
        n=int(n),
        labels=labels,
        theta_mean=num(summary.theta_mean),
        lambda_mean=[num(v) for v in summary.lambda_mean],
        psrf=num(summary.psrf),
        density=network_density(summary.median_graph),
        density_posterior_mean=summary.density_posterior_mean,
        gcc=clustering_coefficient(summary.median_graph),
        n_reortho=[int(t.n_reortho) for t in traces],
        ridge=None if summary.ridge is None else dict(c0=summary.ridge.c0, eta=summary.ridge.eta),
        config=config.to_dict(),
    )
    if extra:
        info.update(extra)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(info, fh, indent=1, sort_keys=True)
    return info


def read_edges(path, n=None):
    """Parse edges.csv back into ``(edge_prob, median_graph)``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if n is None:
        n = 1 + max(int(r["j"]) for r in rows) if rows else 0
    p = np.zeros((n, n))
    g = np.zeros((n, n), dtype=np.int8)
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        p[i, j] = p[j, i] = float(r["edge_prob"])
        g[i, j] = g[j, i] = int(r["median_edge"])
    return p, g


def read_latent(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[float(r["u1"]), float(r["u2"])] for r in rows])


def fit_to_dir(panel, config, out_dir, extra=None):
    summary, traces = fit(panel, config)
    info = emit_outputs(summary, traces, out_dir, config, panel.labels, extra)
    return summary, info


def _fit_window(args):
    k, panel, config, out_dir, extra = args
    try:
        summary, info = fit_to_dir(panel, config, out_dir, extra)
    except (ValidationError, NumericalError) as e:
        raise type(e)(f"window {k}: {e}") from e
    return k, summary.u_hat, info


def _write_column(path, name, labels, values, ends):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "end_date", name])
        for k, e, v in zip(labels, ends, values):
            w.writerow([k, str(e), fmt(v)])


def rolling_fit(panel, plan, config, out_dir, jobs=1):
    """Fit every window of `plan` and write per-window folders plus series files.

    Series files: density.csv, standardized_density.csv, gcc.csv and (BCGLPM
    modes) procrustes.csv, each indexed by window and its last date;
    critical_periods.csv lists the runs of positive standardized density.
    Returns a dict of the series.
    """
    if plan.T != panel.T:
        raise ValidationError("window plan does not match the panel length")
    os.makedirs(out_dir, exist_ok=True)
    jobs_ = []
    for k, (a, b) in enumerate(plan.ranges):
        wdir = os.path.join(out_dir, f"window_{k:04d}")
        extra = dict(window=k, start=str(panel.dates[a]), end=str(panel.dates[b - 1]))
        jobs_.append((k, panel.window(a, b), config, wdir, extra))

    results = {}
    if jobs > 1 and len(jobs_) > 1:
        inner = FitConfig(**{**config.to_dict(), "jobs": 1})
        jobs_ = [(k, p, inner, d, e) for k, p, _, d, e in jobs_]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for k, u, info in ex.map(_fit_window, jobs_):
                results[k] = (u, info)
    else:
        for job in jobs_:
            k, u, info = _fit_window(job)
            results[k] = (u, info)
            log.info("window %d/%d done: density %.4f", k + 1, len(jobs_), info["density"])

    ks = sorted(results)
    ends = [results[k][1]["end"] for k in ks]
    dens = np.array([results[k][1]["density"] for k in ks])
    gcc = np.array([results[k][1]["gcc"] for k in ks])
    _write_column(os.path.join(out_dir, "density.csv"), "density", ks, dens, ends)
    _write_column(os.path.join(out_dir, "gcc.csv"), "gcc", ks, gcc, ends)
    try:
        z = standardize_series(dens)
    except ValidationError as e:
        log.warning("standardized density undefined (%s); writing nan", e)
        z = np.full(dens.size, np.nan)
    _write_column(os.path.join(out_dir, "standardized_density.csv"), "z", ks, z, ends)
    runs = positive_periods(z, ends)
    with open(os.path.join(out_dir, "critical_periods.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start", "end"])
        w.writerows(runs)
    out = dict(density=dens, standardized_density=z, gcc=gcc, critical_periods=runs, ends=ends)
    if config.model != "sssl":
        us = [results[k][0] for k in ks]
        d = [procrustes(u0, u1).d for u0, u1 in zip(us[:-1], us[1:])]
        with open(os.path.join(out_dir, "procrustes.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "end_date", "d"])
            for k, e, v in zip(ks[1:], ends[1:], d):
                w.writerow([k, e, fmt(v)])
        out["procrustes"] = np.array(d)
    return out
