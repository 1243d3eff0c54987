"""Runtime scaling of filtering and smoothing.

Filtering is O(T N) and backward smoothing with ``M = N`` paths is
O(T N^2); :func:`scaling_slopes` fits the log-log slopes of measured
runtimes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .experiments import simulate
from .filters import FilterConfig, run_filter
from .smoothing import backward_smooth

HEADER = ("phase", "N", "T", "elapsed_ms")


@dataclass(frozen=True)
class BenchRow:
    phase: str
    N: int
    T: int
    elapsed_ms: float


def _time_once(model, y, config, seed, threads):
    t0 = time.perf_counter()
    report = run_filter(model, y, config, seed, store_history=True)
    t1 = time.perf_counter()
    backward_smooth(model, report, config.n_particles, seed=seed, threads=threads)
    t2 = time.perf_counter()
    return (t1 - t0) * 1e3, (t2 - t1) * 1e3


def time_point(model, y, config, seed=0, threads=1, repeats=5):
    """Best-of-``repeats`` filtering and smoothing times in milliseconds."""
    best_f, best_s = np.inf, np.inf
    for _ in range(max(1, int(repeats))):
        f, s = _time_once(model, y, config, seed, threads)
        best_f, best_s = min(best_f, f), min(best_s, s)
    return best_f, best_s


def run_bench(model, n_values=(500, 1000, 2000), t_values=(200, 500, 1000), T=100, N=500,
              algorithm="PL", seed=0, threads=1, repeats=5):
    """Sweep ``N`` at fixed ``T`` and ``T`` at fixed ``N``.

    Returns
    -------
    list of BenchRow
        Phases ``filter`` and ``smooth`` for every point of both sweeps.
    """
    data = simulate(model, max([T, *t_values]), seed)
    rows = []
    points = [(n, T) for n in n_values] + [(N, t) for t in t_values]
    for n, t in points:
        cfg = FilterConfig(algorithm=algorithm, n_particles=n)
        f, s = time_point(model, data.y[:t], cfg, seed, threads, repeats)
        rows.append(BenchRow("filter", n, t, f))
        rows.append(BenchRow("smooth", n, t, s))
    return rows


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` on ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def scaling_slopes(rows, T=100, N=500):
    """Slopes versus ``N`` (at ``T``) and versus ``T`` (at ``N``) per phase.

    Returns
    -------
    dict
        Keys ``(phase, "N")`` and ``(phase, "T")``.
    """
    out = {}
    for phase in ("filter", "smooth"):
        by_n = sorted((r.N, r.elapsed_ms) for r in rows if r.phase == phase and r.T == T)
        by_t = sorted((r.T, r.elapsed_ms) for r in rows if r.phase == phase and r.N == N
                      and r.T != T)
        if len(by_n) >= 2:
            out[(phase, "N")] = loglog_slope(*zip(*by_n))
        if len(by_t) >= 2:
            out[(phase, "T")] = loglog_slope(*zip(*by_t))
    return out


__all__ = ["BenchRow", "HEADER", "run_bench", "time_point", "loglog_slope", "scaling_slopes"]
