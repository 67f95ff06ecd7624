"""Command line entry point: ``bcglpm simulate|fit|rolling|evaluate|procrustes``.

``--config`` takes a TOML or JSON file whose keys override the flags. Keys
are FitConfig fields (n_iter, burn_in, v0, ...) plus input, input_kind,
market, out, mode, log_rv, window_len and step.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from importlib import resources

from . import __version__
from .analysis import procrustes, recovery_metrics
from .exceptions import NumericalError, ValidationError
from .mcmc import MODES, FitConfig
from .pipeline import (RunConfig, WindowPlan, fit_to_dir, load_panel, read_edges, read_latent,
                       read_truth, rolling_fit)
from .rng import DEFAULT_SEED
from .synth import SETUPS, replicate_benchmark

log = logging.getLogger("bcglpm")

FIT_KEYS = {f.name for f in fields(FitConfig)}
RUN_KEYS = {"input", "input_kind", "market", "out", "mode", "log_rv", "window_len", "step"}


def data_path(name):
    return str(resources.files("bcglpm") / "data" / name)


def load_config(path):
    """Read a flat TOML or JSON mapping (by file extension)."""
    if path.endswith(".json"):
        with open(path) as fh:
            cfg = json.load(fh)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            try:
                cfg = tomllib.load(fh)
            except tomllib.TOMLDecodeError as e:
                raise ValidationError(f"{path}: {e}") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: expected a mapping")
    unknown = set(cfg) - FIT_KEYS - RUN_KEYS
    if unknown:
        raise ValidationError(f"{path}: unknown key(s) {sorted(unknown)}")
    return cfg


def _fit_flags(p, input_kind):
    p.add_argument("--input", help="CSV file ('toy' = bundled 10-instrument price file)")
    p.add_argument("--input-kind", choices=("prices", "series"), default=input_kind)
    p.add_argument("--market", nargs="*", default=[], help="columns used as market indicators")
    p.add_argument("--mode", choices=sorted(MODES), default="bcglpm1")
    p.add_argument("--out", default="out")
    p.add_argument("--n-iter", type=int, default=10000)
    p.add_argument("--burn-in", type=int, default=3000)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--v0", type=float, default=0.02)
    p.add_argument("--h", type=float, default=50.0)
    p.add_argument("--c0", type=float, default=None, help="fixed ridge scale (skips grid search)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-log-rv", dest="log_rv", action="store_false")
    p.add_argument("--config")


def build_parser():
    ap = argparse.ArgumentParser(prog="bcglpm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write synthetic planted-graph datasets")
    s.add_argument("--n", type=int, nargs="+", default=[50])
    s.add_argument("--t-mult", type=int, nargs="+", default=[2, 10])
    s.add_argument("--setup", nargs="+", choices=SETUPS, default=list(SETUPS))
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit one panel")
    _fit_flags(f, "series")

    r = sub.add_parser("rolling", help="rolling-window fits on a price file")
    _fit_flags(r, "prices")
    r.add_argument("--window-len", type=int, default=252)
    r.add_argument("--step", type=int, default=21)

    e = sub.add_parser("evaluate", help="recovery metrics of edges.csv against a truth file")
    e.add_argument("--edges", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--threshold", type=float, default=0.5)

    q = sub.add_parser("procrustes", help="Procrustes fit of two latent.csv files")
    q.add_argument("target")
    q.add_argument("source")
    return ap


def run_config(args):
    opts = dict(input=args.input, input_kind=args.input_kind, market=args.market, out=args.out,
                mode=args.mode, log_rv=args.log_rv,
                window_len=getattr(args, "window_len", 252), step=getattr(args, "step", 21))
    fit_kw = dict(n_iter=args.n_iter, burn_in=args.burn_in, n_chains=args.chains, thin=args.thin,
                  v0=args.v0, h=args.h, c0=args.c0, seed=args.seed, jobs=args.jobs)
    if args.config:
        cfg = load_config(args.config)
        for k, v in cfg.items():
            (opts if k in RUN_KEYS else fit_kw)[k] = v
    if not opts["input"]:
        raise ValidationError("--input is required")
    if opts["input"] == "toy":
        opts["input"] = data_path("toy_prices.csv")
        opts["input_kind"] = "prices"
    fit_kw.pop("model", None)
    fit_kw.pop("lag_mode", None)
    try:
        fc = FitConfig.for_mode(opts["mode"], **fit_kw)
    except TypeError as e:
        raise ValidationError(str(e)) from None
    run = RunConfig(fc, opts["input"], opts["market"], opts["out"], opts["input_kind"],
                    bool(opts["log_rv"]), int(opts["window_len"]), int(opts["step"]))
    return run


def cmd_simulate(args):
    man = replicate_benchmark(args.n, args.t_mult, args.setup, args.reps, args.seed, args.out)
    print(json.dumps(dict(instances=len(man), out=args.out)))


def cmd_fit(args):
    run = run_config(args)
    panel = load_panel(run)
    _, info = fit_to_dir(panel, run.fit, run.out_dir)
    print(json.dumps(dict(out=run.out_dir, density=info["density"], psrf=info["psrf"])))


def cmd_rolling(args):
    run = run_config(args)
    panel = load_panel(run)
    plan = WindowPlan(panel.T, run.window_len, run.step)
    log.info("%d windows of %d rows", len(plan), plan.window_len)
    # windows run in parallel; chains inside each window stay serial
    jobs = run.fit.jobs
    series = rolling_fit(panel, plan, run.fit, run.out_dir, jobs=jobs)
    print(json.dumps(dict(out=run.out_dir, windows=len(plan),
                          critical_periods=[list(r) for r in series["critical_periods"]])))


def cmd_evaluate(args):
    truth, _ = read_truth(args.truth)
    prob, _ = read_edges(args.edges, truth.shape[0])
    rep = recovery_metrics(prob, truth, args.threshold)
    print(json.dumps(rep.as_dict()))


def cmd_procrustes(args):
    res = procrustes(read_latent(args.target), read_latent(args.source))
    print(json.dumps(dict(rho=res.rho, d=res.d)))


COMMANDS = dict(simulate=cmd_simulate, fit=cmd_fit, rolling=cmd_rolling,
                evaluate=cmd_evaluate, procrustes=cmd_procrustes)


def main(argv=None):
    level = os.environ.get("BCGLPM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
