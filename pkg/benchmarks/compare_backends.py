"""Time the compiled and pure-Python kernels on the same workloads.

Usage: python3 benchmarks/compare_backends.py [--n 500 1000 2000] [--T 100]

Prints filtering and smoothing times per backend and the largest
difference between the two backends' outputs (libm and numpy ``exp``/``log``
may differ in the last bit).
"""
import argparse
import time

import numpy as np

import particle_learning as pl
from particle_learning import _backend
from particle_learning.experiments import simulate
from particle_learning.smoothing import backward_smooth


def timed(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1e3, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[500, 1000, 2000])
    ap.add_argument("--T", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if "compiled" not in _backend.available():
        raise SystemExit("compiled backend not built; run pip install -e . --no-build-isolation")
    model = pl.LocalLevel(sigma2=1.0, tau2=0.5, m0=0.0, C0=100.0, x0=0.0)
    y = simulate(model, args.T, 0).y
    print(f"{'N':>6} {'backend':>9} {'filter_ms':>10} {'smooth_ms':>10}")
    for n in args.n:
        cfg = pl.FilterConfig("PL", n)
        reports = {}
        for name in ("compiled", "python"):
            prev = pl.set_backend(name)
            try:
                f_ms, rep = timed(lambda: pl.run_filter(model, y, cfg, 0, store_history=True),
                                  args.repeats)
                s_ms, _ = timed(lambda: backward_smooth(model, rep, n, seed=0), args.repeats)
            finally:
                pl.set_backend(prev)
            reports[name] = rep
            print(f"{n:>6} {name:>9} {f_ms:>10.1f} {s_ms:>10.1f}")
        a, b = reports["compiled"], reports["python"]
        ds = np.abs(a.summaries["state"] - b.summaries["state"]).max()
        dl = np.abs(a.logpred - b.logpred).max()
        print(f"{n:>6} max |diff|: summaries {ds:.3g}, log predictive {dl:.3g}")


if __name__ == "__main__":
    main()
