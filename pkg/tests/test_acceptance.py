"""Acceptance criteria 1-10.

Each criterion is a function returning ``(passed, detail)``.  Under pytest
every criterion is one test that records a ``criterion N: PASS|FAIL`` line,
shown in the terminal summary; ``python3 tests/test_acceptance.py`` runs
them all and prints the same lines.
"""
import time

import numpy as np
import pytest
from scipy import stats

import particle_learning as pl
from particle_learning import FilterConfig, LocalLevel, ParticleCloud, run_filter
from particle_learning.bench import run_bench, scaling_slopes
from particle_learning.core import resample_multinomial, resample_systematic
from particle_learning.experiments import (PRESETS, final_means, final_quantiles, iqr,
                                           pure_filter_experiment, simulate)
from particle_learning.models.distributions import draw_invgamma
from particle_learning.monitoring import bayes_factor
from particle_learning.oracle import (grid_param_posterior, kalman_filter, kalman_loglik,
                                      kalman_smoother)
from particle_learning.rng import stream
from particle_learning.smoothing import backward_smooth

pytestmark = pytest.mark.acceptance


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# 1 -----------------------------------------------------------------------------

def criterion_1():
    """Full adaptation: predictive times propagation equals likelihood times transition."""
    def body():
        n = 10 ** 4
        g = stream(101)
        th = {"sigma2": g.uniform(0.01, 5, n), "tau2": g.uniform(0.01, 5, n),
              "beta": np.ones(n)}
        m = LocalLevel(sigma2=1.0, tau2=1.0)
        x = g.normal(0, 3, n)
        y = x + g.normal(0, 2, n)
        c = ParticleCloud(states=x, thetas=th)
        _, xn, _ = m.propagate_state(c, y, g)
        log_ratio = (m.obs_logdensity(xn, y, th) + m.transition_logdensity(xn, x, th)
                     - m.predictive_logdensity(c, y) - m.posterior_logdensity(xn, x, y, th))
        return np.max(np.abs(np.expm1(log_ratio)))
    worst, secs = _timed(body)
    return worst <= 1e-10 and secs < 1.0, f"max |ratio - 1| = {worst:.2e}, {secs:.2f}s"


# 2 -----------------------------------------------------------------------------

def criterion_2():
    """Known-parameter PL mean against the exact Kalman mean."""
    def body():
        m = LocalLevel(sigma2=0.13, tau2=0.013, m0=0.0, C0=10.0, x0=0.0)
        n = 5000
        inside = []
        for seed in range(20):
            d = simulate(m, 100, seed)
            kf = kalman_filter(d.y, 0.13, 0.013, 0.0, 10.0)
            r = run_filter(m, d.y, FilterConfig("PL", n), seed=seed)
            inside.append(np.abs(r.mean() - kf.m) < 3 * np.sqrt(kf.C / n))
        return float(np.mean(inside))
    frac, secs = _timed(body)
    return frac >= 0.95 and secs < 60, f"{100 * frac:.1f}% of (t, seed) pairs inside 3 sqrt(C_t/N), {secs:.1f}s"


# 3 -----------------------------------------------------------------------------

def criterion_3():
    """Pure-filter grid: PL has negative LRMSE against BF and the lowest median MSE."""
    def body():
        return pure_filter_experiment(PRESETS["pure_filter"])
    out, secs = _timed(body)
    lr = out["lrmse"].time_average("PL")
    mse = out["mse"]
    med = {f: mse.time_average(f)[mse.alphas.index(0.5)] for f in ("PL", "FABF", "APF")}
    ok = bool(np.all(lr < 0)) and med["PL"] <= med["FABF"] <= med["APF"] and secs < 600
    return ok, (f"PL LRMSE {np.round(lr, 3).tolist()}; median MSE PL {med['PL']:.2e} "
                f"FABF {med['FABF']:.2e} APF {med['APF']:.2e}, {secs:.1f}s")


# 4 -----------------------------------------------------------------------------

def criterion_4():
    """State-sufficient-statistic PL has smaller cross-run spread of final variance quantiles."""
    out, secs = _timed(lambda: final_quantiles(PRESETS["rao_blackwell"]))
    cells = []
    for k in ("sigma2", "tau2"):
        a = out["PL"][k].std(axis=0, ddof=1)
        b = out["PL_SUFF"][k].std(axis=0, ddof=1)
        cells.extend((b < a).tolist())
    wins = int(np.sum(cells))
    return wins >= 4 and secs < 600, f"PL_SUFF smaller in {wins}/6 cells, {secs:.1f}s"


# 5 -----------------------------------------------------------------------------

def criterion_5():
    """AR(1) coefficient learning: PL posterior means vary less across runs than LW."""
    out, secs = _timed(lambda: final_means(PRESETS["pl_vs_lw"], "beta"))
    a, b = iqr(out["PL"]), iqr(out["LW"])
    return a < b and secs < 600, f"IQR PL {a:.4f} vs LW {b:.4f}, {secs:.1f}s"


# 6 -----------------------------------------------------------------------------

def criterion_6():
    """Backward smoother against the exact smoother.

    The Monte Carlo SE at each t is the standard deviation across ten
    independent filter-plus-smoother replicates on the same data.
    """
    def body():
        m = LocalLevel(sigma2=1.0, tau2=0.5, m0=0.0, C0=100.0, x0=0.0)
        d = simulate(m, 100, 0)
        ks = kalman_smoother(kalman_filter(d.y, 1.0, 0.5, 0.0, 100.0), 0.5)
        mu, va = [], []
        for rep in range(10):
            r = run_filter(m, d.y, FilterConfig("PL", 1000), seed=0, replication=rep,
                           store_history=True)
            sd = backward_smooth(m, r, 1000, seed=0, replication=rep)
            mu.append(sd.mean())
            va.append(sd.var())
        mu, va = np.array(mu), np.array(va)
        ok_m = np.abs(mu - ks.m) <= 4 * mu.std(axis=0, ddof=1)
        ok_v = np.abs(va - ks.C) <= 4 * va.std(axis=0, ddof=1)
        return float(ok_m.mean()), float(ok_v.mean())
    (fm, fv), secs = _timed(body)
    ok = fm >= 0.95 and fv >= 0.95 and secs < 120
    return ok, f"means {100 * fm:.1f}%, variances {100 * fv:.1f}% within 4 SE, {secs:.1f}s"


# 7 -----------------------------------------------------------------------------

def criterion_7():
    """Final (sigma2, tau2) posterior means against the grid oracle."""
    def body():
        m = LocalLevel(sigma2=1.0, tau2=0.1, m0=0.0, C0=10.0, x0=0.0,
                       learn=("sigma2", "tau2"))
        good = 0
        worst = 0.0
        for seed in range(10):
            d = simulate(m, 50, seed)
            g = grid_param_posterior(d.y, (5.0, 4.0), (5.0, 0.4), 0.0, 10.0)
            r = run_filter(m, d.y, FilterConfig("PL", 5000), seed=seed)
            err = [abs(r.mean(k)[-1] - g.mean(k)) / g.sd(k) for k in ("sigma2", "tau2")]
            worst = max(worst, max(err))
            good += max(err) <= 0.05 * 4
        return good, worst
    (good, worst), secs = _timed(body)
    return good >= 8 and secs < 300, (f"{good}/10 seeds within 0.2 oracle sd "
                                      f"(worst {worst:.3f}), {secs:.1f}s")


# 8 -----------------------------------------------------------------------------

def criterion_8():
    """Runtime scaling: filtering linear, smoothing quadratic in N, both linear in T."""
    m = LocalLevel(sigma2=1.0, tau2=0.5, m0=0.0, C0=100.0, x0=0.0)
    rows, secs = _timed(lambda: run_bench(m, (500, 1000, 2000), (200, 500, 1000), T=100, N=500))
    s = scaling_slopes(rows, T=100, N=500)
    ok = (1.7 <= s[("smooth", "N")] <= 2.3 and 0.8 <= s[("filter", "N")] <= 1.2
          and 0.8 <= s[("smooth", "T")] <= 1.2 and 0.8 <= s[("filter", "T")] <= 1.2
          and secs < 600)
    detail = ", ".join(f"{p} vs {a} {v:.2f}" for (p, a), v in sorted(s.items()))
    return ok, f"slopes: {detail}, {secs:.1f}s"


# 9 -----------------------------------------------------------------------------

def criterion_9():
    """Marginal likelihood estimator unbiased in the linear domain; self Bayes factor 1."""
    def body():
        m = LocalLevel(sigma2=1.0, tau2=0.5, m0=0.0, C0=10.0, x0=0.0)
        d = simulate(m, 10, 0)
        exact = kalman_loglik(d.y, 1.0, 0.5, 0.0, 10.0)
        ll = np.array([run_filter(m, d.y, FilterConfig("PL", 100), seed=0,
                                  replication=r).logml[-1] for r in range(2000)])
        ratio = np.exp(ll - exact)
        a = run_filter(m, d.y, FilterConfig("PL", 100), seed=3)
        b = run_filter(m, d.y, FilterConfig("PL", 100), seed=3)
        return ratio.mean(), ratio.std(ddof=1) / np.sqrt(ratio.size), np.all(bayes_factor(a, b) == 1.0)
    (mean, se, self_one), secs = _timed(body)
    ok = abs(mean - 1.0) <= 4 * se and self_one and secs < 120
    return ok, f"mean ratio to exact {mean:.4f} (SE {se:.4f}), self Bayes factor 1: {bool(self_one)}, {secs:.1f}s"


# 10 ----------------------------------------------------------------------------

def _bayes_identity():
    g = stream(110)
    n = 10 ** 4
    th = {"sigma2": g.uniform(0.01, 10, n), "tau2": g.uniform(0.01, 10, n), "beta": np.ones(n)}
    m = LocalLevel(sigma2=1.0, tau2=1.0)
    x, xn, y = g.normal(0, 5, n), g.normal(0, 5, n), g.normal(0, 5, n)
    c = ParticleCloud(states=x, thetas=th)
    lhs = m.predictive_logdensity(c, y) + m.posterior_logdensity(xn, x, y, th)
    rhs = m.obs_logdensity(xn, y, th) + m.transition_logdensity(xn, x, th)
    return bool(np.all(np.abs(np.expm1(lhs - rhs)) <= 1e-10))


def _batch_equals_recursive():
    m = LocalLevel(sigma2=1.0, tau2=0.1, learn=("sigma2", "tau2"))
    d = m.simulate(100, stream(111))
    s = m.empty_stats(1)
    prev = np.array([d.x0])
    for t in range(100):
        s = m.update_param_suffstats(s, prev, d.x[t:t + 1], d.y[t])
        prev = d.x[t:t + 1]
    b = m.batch_suffstats(d.x0, d.x, d.y)
    return all(np.asarray(s[k]).reshape(-1)[0] == v for k, v in b.items())


def _chi_square():
    w = np.array([0.1, 0.2, 0.3, 0.4])
    ok = True
    for draw in (resample_multinomial, resample_systematic):
        g = stream(112)
        counts = np.zeros(4)
        for _ in range(10 ** 4):
            counts += np.bincount(draw(w, 4, g), minlength=4)
        ok &= stats.chisquare(counts, counts.sum() * w).pvalue > 0.001
    return bool(ok)


def _sampler_moments():
    n = 10 ** 5
    g = stream(113)

    def close(x, mean, var):
        return abs(x.mean() - mean) < 5 * np.sqrt(var / n)

    ig = stats.invgamma(10.0, scale=9.0)
    ok = close(draw_invgamma(g, 10.0, 9.0, n), ig.mean(), ig.var())
    ok &= close(g.beta(3.0, 2.0, n), 0.6, 0.04)
    ok &= close(0.4 + np.sqrt(0.5) * g.standard_normal(n), 0.4, 0.5)
    m = pl.DynamicFactor(beta1=0.5, beta2=1.5, sigma2=2.0, tau2=0.1, p=0.9, q=0.8,
                         learn=("sigma2", "beta1", "p"), prior_beta1=(0.4, 0.25),
                         prior_p=(3.0, 2.0), prior_sigma2=(24.0, 44.0))
    th = m.sample_theta(m.empty_stats(n), g, n)
    s2 = stats.invgamma(12.0, scale=22.0)
    ok &= close(th["sigma2"], s2.mean(), s2.var())
    ok &= close(th["beta1"], 0.4, 0.25 * s2.mean())
    ok &= close(th["p"], 0.6, 0.04)
    return bool(ok)


def _grid_normalization():
    y = simulate(LocalLevel(sigma2=1.0, tau2=0.1, x0=0.0), 50, 0).y
    return abs(grid_param_posterior(y).mass.sum() - 1.0) <= 1e-12


def criterion_10():
    """Identity and conjugacy suites."""
    checks = {"bayes identity": _bayes_identity, "batch = recursive": _batch_equals_recursive,
              "resampler chi-square": _chi_square, "sampler moments": _sampler_moments,
              "grid normalization": _grid_normalization}
    t0 = time.perf_counter()
    res = {k: f() for k, f in checks.items()}
    secs = time.perf_counter() - t0
    failed = [k for k, v in res.items() if not v]
    return not failed and secs < 120, (f"failed: {failed}" if failed else "all suites pass") + f", {secs:.1f}s"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def _line(i, ok, detail):
    return f"criterion {i}: {'PASS' if ok else 'FAIL'} - {detail}"


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_log):
    ok, detail = CRITERIA[number]()
    line = _line(number, ok, detail)
    acceptance_log.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    for i, fn in CRITERIA.items():
        print(_line(i, *fn()), flush=True)
