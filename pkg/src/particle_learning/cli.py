"""Command-line interface: ``plearn SUBCOMMAND --config PATH``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
Files written by a failing command are removed.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bench import HEADER as BENCH_HEADER
from .bench import run_bench, scaling_slopes
from .config import load_config
from .errors import (ConfigError, InvalidData, LengthMismatch, MissingHistory, MissingOracle,
                     NumericalError, ParticleLearningError, UnsupportedConditioningSet)
from .experiments import (ExperimentSpec, filter_grid, grid_truth, kalman_truth, lrmse_table,
                          mae_table, mse_table, simulate)
from .filters import QUANTILES, SUMMARY_COLUMNS, FilterConfig, run_filter
from .io import read_observations, write_csv
from .monitoring import log_bayes_factor
from .smoothing import backward_smooth

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
FILTER_HEADER = ("t",) + SUMMARY_COLUMNS + ("logpred", "elapsed_ms")


class _Outputs:
    """Tracks written files so a failed command can remove them."""

    def __init__(self, directory):
        self.directory = directory
        self.written = []

    def path(self, name):
        p = os.path.join(self.directory, name)
        self.written.append(p)
        return p

    def cleanup(self):
        for p in self.written:
            try:
                os.remove(p)
            except OSError:
                pass


def _seed(args, cfg):
    return cfg.seed if args.seed is None else args.seed


def _observations(cfg, model, seed):
    if cfg.data_path is not None:
        y = read_observations(cfg.data_path)
        return y[: cfg.T] if cfg.T is not None else y
    return simulate(model, cfg.T, seed).y


# -- subcommands ----------------------------------------------------------

def cmd_simulate(args, cfg, out):
    model = cfg.model.build()
    data = simulate(model, cfg.T if cfg.T is not None else 100, _seed(args, cfg))
    y = data.y.reshape(data.y.shape[0], -1)
    header = ["t"] + [f"y{j + 1}" for j in range(y.shape[1])] + ["x_true"]
    cols = [np.arange(1, y.shape[0] + 1), *y.T, data.x]
    if data.aux is not None:
        header.append("lambda_true")
        cols.append(data.aux)
    write_csv(out.path("simulated.csv"), header, _zip_rows(cols))


def _zip_rows(cols):
    return zip(*[c.tolist() for c in cols])


def _write_report(out, report, prefix):
    t = np.arange(1, report.T + 1)
    for target in report.targets:
        s = report.summaries[target]
        cols = [t, *s.T, report.logpred, report.elapsed_ms]
        write_csv(out.path(f"{prefix}_{target}.csv"), FILTER_HEADER, _zip_rows(cols))
    if report.regime_prob is not None:
        write_csv(out.path(f"{prefix}_regime.csv"), ("t", "prob_regime1"),
                  _zip_rows([t, report.regime_prob]))


def cmd_filter(args, cfg, out):
    model = cfg.model.build()
    seed = _seed(args, cfg)
    y = _observations(cfg, model, seed)
    for label, fc in cfg.filters.items():
        report = run_filter(model, y, fc, seed)
        _write_report(out, report, "filter" if label == "filter" else f"filter_{label}")


def cmd_smooth(args, cfg, out):
    model = cfg.model.build()
    seed = _seed(args, cfg)
    y = _observations(cfg, model, seed)
    report = run_filter(model, y, cfg.filter, seed, store_history=True)
    draws = backward_smooth(model, report, cfg.smooth.get("paths"), seed=seed,
                            threads=args.threads)
    t = np.arange(1, draws.T + 1)
    write_csv(out.path("smooth_state.csv"), ("t",) + SUMMARY_COLUMNS,
              _zip_rows([t, *draws.summaries().T]))
    if cfg.smooth.get("raw_paths"):
        header = ["path"] + [f"x{k}" for k in t] + list(draws.thetas)
        cols = [np.arange(1, draws.n_paths + 1), *draws.paths.T,
                *[draws.thetas[k] for k in draws.thetas]]
        write_csv(out.path("smooth_paths.csv"), header, _zip_rows(cols))


def cmd_monitor(args, cfg, out):
    alt = load_config(args.alt) if args.alt else cfg
    m0, m1 = cfg.model.build(), alt.model.build()
    seed = _seed(args, cfg)
    y = _observations(cfg, m0, seed)
    r0 = run_filter(m0, y, cfg.filter, seed)
    r1 = run_filter(m1, y, alt.filter, seed)
    lbf = log_bayes_factor(r1, r0)
    t = np.arange(1, r0.T + 1)
    write_csv(out.path("monitor.csv"), ("t", "logml_M0", "logml_M1", "log_bayes_factor"),
              _zip_rows([t, r0.logml, r1.logml, lbf]))


def _compare_spec(cfg, seed):
    ms = cfg.model
    kw = dict(ms.kwargs)
    learn = tuple(kw.pop("learn", ()))
    theta = {k: kw.pop(k) for k in list(kw) if k in {"sigma2", "tau2", "beta", "nu", "beta1",
                                                      "beta2", "p", "q"}}
    filters = tuple(fc.algorithm for fc in cfg.filters.values())
    if len(filters) < 2:
        raise ConfigError("compare needs at least two [filter.NAME] blocks")
    if len(set(filters)) != len(filters):
        raise ConfigError(f"compare filter blocks must use distinct algorithms, got {filters}")
    sizes = {fc.n_particles for fc in cfg.filters.values()}
    if len(sizes) != 1:
        raise ConfigError("compare filter blocks must share n_particles")
    deltas = {fc.lw_delta for fc in cfg.filters.values()}
    cmp_ = cfg.compare
    return ExperimentSpec(
        model=ms.name, theta=theta, learn=learn, model_options=kw,
        T=cfg.T if cfg.T is not None else 100, n_particles=sizes.pop(),
        datasets=cfg.datasets, runs=cfg.runs, filters=filters,
        alphas=cmp_.get("alphas", (0.05, 0.25, 0.5, 0.75, 0.95)), seed=seed,
        target=cmp_.get("target", "state"), lw_delta=deltas.pop())


def _reference_truth(spec, model, data, particles):
    # designated long PL run per dataset when no exact oracle exists
    if not particles:
        raise MissingOracle(
            "no exact oracle for this model and target; set [compare] reference_particles")
    cfg = FilterConfig("PL", particles)
    out = []
    for d, ds in enumerate(data):
        rep = run_filter(model, ds.y, cfg, spec.seed, replication=10 ** 6 + d)
        out.append(np.column_stack([rep.quantile(spec.target, a) for a in spec.alphas]))
    return np.asarray(out)


def cmd_compare(args, cfg, out):
    seed = _seed(args, cfg)
    spec = _compare_spec(cfg, seed)
    model = spec.build_model()
    data = [simulate(model, spec.T, seed, d) for d in range(spec.datasets)]
    est = filter_grid(spec, model, data)
    particles = cfg.compare.get("reference_particles")
    try:
        if spec.target == "state" and not spec.learn and spec.model == "local_level":
            truth = kalman_truth(spec, data)
        elif particles:
            truth = _reference_truth(spec, model, data, particles)
        else:
            truth = np.asarray([grid_truth(spec, ds.y) for ds in data])
    except MissingOracle:
        truth = _reference_truth(spec, model, data, particles)
    reference = cfg.compare.get("reference", spec.filters[0])
    if reference not in spec.filters:
        raise ConfigError(f"[compare] reference {reference!r} is not one of {spec.filters}")
    mse = mse_table(est, truth, spec.alphas, spec.target)
    tables = [mse, lrmse_table(mse, reference)]
    tables.append(mae_table({k: v.reshape(-1, *v.shape[2:]) for k, v in est.items()},
                            truth.mean(axis=0), spec.alphas, spec.target)
                  if spec.datasets == 1 else None)
    rows = [row for tab in tables if tab is not None for row in tab.rows()]
    write_csv(out.path("compare.csv"), ("filter", "t", "alpha", "metric", "value"), rows)


def cmd_bench(args, cfg, out):
    b = cfg.bench
    rows = run_bench(cfg.model.build(), b.get("n_values", (500, 1000, 2000)),
                     b.get("t_values", (200, 500, 1000)), b.get("T", 100), b.get("N", 500),
                     cfg.filter.algorithm, _seed(args, cfg), args.threads, b.get("repeats", 5))
    write_csv(out.path("bench.csv"), BENCH_HEADER,
              [(r.phase, r.N, r.T, r.elapsed_ms) for r in rows])
    for (phase, axis), slope in sorted(scaling_slopes(rows, b.get("T", 100), b.get("N", 500)).items()):
        print(f"{phase} runtime slope vs {axis}: {slope:.3f}")


COMMANDS = {
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "smooth": cmd_smooth,
    "monitor": cmd_monitor,
    "compare": cmd_compare,
    "bench": cmd_bench,
}


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {v}")
    return v


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="plearn", description="Particle learning experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--seed", type=_u64, default=None, help="overrides [run] seed")
        sp.add_argument("--threads", type=_positive, default=1)
        sp.add_argument("--out", default=None, metavar="DIR",
                        help="overrides [output] directory")
        if name == "monitor":
            sp.add_argument("--alt", default=None, metavar="PATH",
                            help="configuration of the alternative model M1 (default: same as M0)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    out = None
    try:
        cfg = load_config(args.config)
        directory = args.out if args.out is not None else cfg.output_dir
        os.makedirs(directory, exist_ok=True)
        out = _Outputs(directory)
        COMMANDS[args.command](args, cfg, out)
    except NumericalError as exc:
        return _fail(out, EXIT_NUMERICAL, exc)
    except (ConfigError, InvalidData, LengthMismatch, MissingOracle, MissingHistory,
            UnsupportedConditioningSet, OSError) as exc:
        return _fail(out, EXIT_CONFIG, exc)
    except ParticleLearningError as exc:
        return _fail(out, EXIT_NUMERICAL, exc)
    return EXIT_OK


def _fail(out, code, exc):
    if out is not None:
        out.cleanup()
    print(f"plearn: error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
