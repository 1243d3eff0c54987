"""Simulation, replication grids and Monte Carlo error metrics.

Seeding policy: dataset ``d`` is simulated from the stream
``(seed, replication=d)`` in the simulation domain; run ``r`` on dataset
``d`` uses the filter stream ``(seed, replication=d * runs + r)`` for every
filter, so all filters of one run share their seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, LengthMismatch, MissingOracle
from .filters import ALGORITHMS, QUANTILES, FilterConfig, run_filter
from .models import build_model
from .oracle import grid_sequential_quantiles, kalman_filter, kalman_quantiles
from .rng import SIMULATE, RngStream

METRICS = ("mse", "lrmse", "mae")


def simulate(model, T, seed, replication=0):
    """Forward-simulate ``T`` observations with the model's true parameters.

    Returns
    -------
    SimulatedData
        Observations plus the latent states (and auxiliary states) that
        produced them.
    """
    T = int(T)
    if T < 1:
        raise ConfigError(f"T must be positive, got {T}")
    return model.simulate(T, RngStream(seed, replication, domain=SIMULATE).generator)


# -- metric tables ---------------------------------------------------------

@dataclass
class MetricTable:
    """One metric per (filter, t, alpha).

    Attributes
    ----------
    metric : str
        ``"mse"``, ``"lrmse"`` or ``"mae"``.
    alphas : tuple of float
    values : dict of str -> ndarray, shape (T, len(alphas))
        Keyed by filter name.
    target : str
        Quantity the quantiles refer to (``"state"`` or a parameter name).
    """

    metric: str
    alphas: tuple
    values: dict
    target: str = "state"

    @property
    def filters(self):
        return tuple(self.values)

    def time_average(self, name):
        """Average over t, shape (len(alphas),)."""
        return self.values[name].mean(axis=0)

    def at(self, name, alpha):
        """Series over t for one filter and quantile level."""
        return self.values[name][:, _alpha_index(self.alphas, alpha)]

    def rows(self):
        """``(filter, t, alpha, metric, value)`` with ``t`` counted from 1."""
        for name, v in self.values.items():
            for t in range(v.shape[0]):
                for j, a in enumerate(self.alphas):
                    yield name, t + 1, a, self.metric, float(v[t, j])


def _alpha_index(alphas, alpha):
    for j, a in enumerate(alphas):
        if abs(a - alpha) < 1e-12:
            return j
    raise KeyError(f"quantile level {alpha} not in {alphas}")


def _stack(estimates):
    out = {}
    for name, q in estimates.items():
        out[name] = np.asarray(q, dtype=np.float64)
    return out


def mse_table(estimates, truth, alphas, target="state"):
    """Mean squared quantile error averaged over datasets and runs.

    Parameters
    ----------
    estimates : dict of str -> array, shape (D, R, T, A)
        Filter quantiles for dataset ``d`` and run ``r``.
    truth : array, shape (D, T, A)
        Exact quantiles per dataset.
    alphas : sequence of float

    Raises
    ------
    MissingOracle
        When ``truth`` is None.
    """
    if truth is None:
        raise MissingOracle("mean squared error needs reference quantiles")
    truth = np.asarray(truth, dtype=np.float64)
    values = {}
    for name, q in _stack(estimates).items():
        if q.ndim != 4 or q.shape[0] != truth.shape[0] or q.shape[2:] != truth.shape[1:]:
            raise LengthMismatch(f"{name}: estimates {q.shape} do not match truth {truth.shape}")
        values[name] = ((q - truth[:, None]) ** 2).mean(axis=(0, 1))
    return MetricTable("mse", tuple(alphas), values, target)


def lrmse_table(mse, reference="BF"):
    """``log(MSE_f / MSE_reference)`` for every filter in an MSE table."""
    if reference not in mse.values:
        raise MissingOracle(f"reference filter {reference!r} not in the table")
    ref = mse.values[reference]
    values = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        for name, v in mse.values.items():
            if v.shape != ref.shape:
                raise LengthMismatch(f"{name}: shape {v.shape} differs from reference {ref.shape}")
            values[name] = np.zeros_like(v) if name == reference else np.log(v / ref)
    return MetricTable("lrmse", mse.alphas, values, mse.target)


def mae_table(estimates, truth, alphas, target="state"):
    """Mean absolute quantile error over runs.

    Parameters
    ----------
    estimates : dict of str -> array, shape (R, T, A)
    truth : array, shape (T, A)
    """
    if truth is None:
        raise MissingOracle("mean absolute error needs reference quantiles")
    truth = np.asarray(truth, dtype=np.float64)
    values = {}
    for name, q in _stack(estimates).items():
        if q.ndim != 3 or q.shape[1:] != truth.shape:
            raise LengthMismatch(f"{name}: estimates {q.shape} do not match truth {truth.shape}")
        values[name] = np.abs(q - truth[None]).mean(axis=0)
    return MetricTable("mae", tuple(alphas), values, target)


# -- experiment grid definition --------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """A replication grid.

    Attributes
    ----------
    model : str
        Registry name.
    theta : dict
        True parameter values (fixed values for the unlearned ones).
    learn : tuple of str
    model_options : dict
        Extra model keywords: priors, ``m0``, ``C0``, ``x0``.
    T, n_particles : int
    datasets, runs : int
        ``D`` simulated series and ``R`` filter runs per series.
    filters : tuple of str
    alphas : tuple of float
        Quantile levels; must be among the levels the filters report.
    seed : int
    target : str
        ``"state"`` or a learned parameter name.
    lw_delta : float
    """

    model: str = "local_level"
    theta: dict = field(default_factory=lambda: {"sigma2": 0.13, "tau2": 0.013})
    learn: tuple = ()
    model_options: dict = field(default_factory=lambda: {"m0": 0.0, "C0": 10.0, "x0": 0.0})
    T: int = 100
    n_particles: int = 1000
    datasets: int = 20
    runs: int = 20
    filters: tuple = ("BF", "APF", "FABF", "PL")
    alphas: tuple = (0.05, 0.25, 0.5, 0.75, 0.95)
    seed: int = 0
    target: str = "state"
    lw_delta: float = 0.95

    def __post_init__(self):
        if self.datasets < 1 or self.runs < 1:
            raise ConfigError("datasets and runs must be at least 1")
        if self.T < 1:
            raise ConfigError(f"T must be positive, got {self.T}")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"quantile level {a} must lie strictly inside (0, 1)")
            if not any(abs(a - q) < 1e-12 for q in QUANTILES):
                raise ConfigError(f"quantile level {a} not among the reported levels {QUANTILES}")
        bad = [f for f in self.filters if f not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown filters {bad}")

    def build_model(self):
        return build_model(self.model, learn=self.learn, **self.theta, **self.model_options)

    def config(self, algorithm):
        return FilterConfig(algorithm=algorithm, n_particles=self.n_particles,
                            lw_delta=self.lw_delta)

    def run_id(self, d, r):
        return d * self.runs + r

    def with_(self, **changes):
        return replace(self, **changes)


def run_replications(model, y, config, runs, seed, first=0, target="state", alphas=QUANTILES,
                     reports=False):
    """Run a filter ``runs`` times on one series.

    Returns
    -------
    ndarray, shape (runs, T, len(alphas))
        Filtered quantiles of ``target`` per run.  With ``reports=True``
        the list of :class:`RunReport` objects is returned as well.
    """
    out = []
    kept = []
    for r in range(runs):
        rep = run_filter(model, y, config, seed, replication=first + r)
        out.append(np.column_stack([rep.quantile(target, a) for a in alphas]))
        if reports:
            kept.append(rep)
    out = np.asarray(out)
    return (out, kept) if reports else out


def simulate_datasets(spec):
    model = spec.build_model()
    return model, [simulate(model, spec.T, spec.seed, d) for d in range(spec.datasets)]


def filter_grid(spec, model=None, data=None):
    """Quantiles of ``spec.target`` for every filter, dataset and run.

    Returns
    -------
    dict of str -> ndarray, shape (D, R, T, A)
    """
    if data is None:
        model, data = simulate_datasets(spec)
    out = {}
    for name in spec.filters:
        cfg = spec.config(name)
        out[name] = np.stack([
            run_replications(model, ds.y, cfg, spec.runs, spec.seed, spec.run_id(d, 0),
                             spec.target, spec.alphas)
            for d, ds in enumerate(data)
        ])
    return out


def kalman_truth(spec, data):
    """Exact state quantiles per dataset for the known-parameter local level model."""
    if spec.model != "local_level" or spec.learn:
        raise MissingOracle("exact state quantiles need the local level model with known parameters")
    th = dict(spec.theta)
    opts = spec.model_options
    out = []
    for ds in data:
        kt = kalman_filter(ds.y, th["sigma2"], th["tau2"], opts.get("m0", 0.0),
                           opts.get("C0", 10.0), th.get("beta", 1.0))
        out.append(kalman_quantiles(kt.m, kt.C, spec.alphas))
    return np.asarray(out)


def pure_filter_experiment(spec, reference="BF"):
    """Known-parameter comparison against the Kalman oracle.

    Returns
    -------
    dict
        ``"mse"`` and ``"lrmse"`` metric tables, plus the raw
        ``"estimates"`` and ``"truth"`` arrays.
    """
    model, data = simulate_datasets(spec)
    est = filter_grid(spec, model, data)
    truth = kalman_truth(spec, data)
    mse = mse_table(est, truth, spec.alphas, spec.target)
    return {"mse": mse, "lrmse": lrmse_table(mse, reference), "estimates": est, "truth": truth}


def grid_truth(spec, y, n=200):
    """Sequential quantiles of ``spec.target`` from the grid oracle.

    Covers the local level model with ``tau2`` learned and ``sigma2`` either
    learned or known.
    """
    if spec.model != "local_level" or "beta" in spec.learn or "tau2" not in spec.learn:
        raise MissingOracle("grid oracle covers the local level model with tau2 learned")
    opts = spec.model_options
    known = None if "sigma2" in spec.learn else spec.theta["sigma2"]
    gs = grid_sequential_quantiles(
        y, spec.alphas, prior_sigma2=tuple(opts.get("prior_sigma2", (5.0, 4.0))),
        prior_tau2=tuple(opts.get("prior_tau2", (5.0, 0.4))), m0=opts.get("m0", 0.0),
        C0=opts.get("C0", 10.0), n=n, sigma2=known)
    if spec.target not in ("state", "sigma2", "tau2"):
        raise MissingOracle(f"no grid quantiles for {spec.target!r}")
    return getattr(gs, spec.target)


def learning_experiment(spec, dataset=0, grid_n=200):
    """Parameter-learning comparison on one series against the grid oracle.

    Returns
    -------
    dict
        ``"mae"`` table, ``"estimates"`` (R, T, A) per filter and ``"truth"``.
    """
    model = spec.build_model()
    ds = simulate(model, spec.T, spec.seed, dataset)
    truth = grid_truth(spec, ds.y, grid_n)
    est = {name: run_replications(model, ds.y, spec.config(name), spec.runs, spec.seed,
                                  spec.run_id(dataset, 0), spec.target, spec.alphas)
           for name in spec.filters}
    return {"mae": mae_table(est, truth, spec.alphas, spec.target), "estimates": est,
            "truth": truth}


def final_quantiles(spec, dataset=0, alphas=None, targets=None):
    """Posterior quantiles at ``t = T`` over ``spec.runs`` runs on one series.

    Returns
    -------
    dict of filter -> dict of target -> ndarray, shape (R, A)
    """
    alphas = spec.alphas if alphas is None else tuple(alphas)
    model = spec.build_model()
    ds = simulate(model, spec.T, spec.seed, dataset)
    targets = tuple(spec.learn) if targets is None else tuple(targets)
    out = {}
    for name in spec.filters:
        per = {k: [] for k in targets}
        for r in range(spec.runs):
            rep = run_filter(model, ds.y, spec.config(name), spec.seed,
                             replication=spec.run_id(dataset, r))
            for k in targets:
                per[k].append([rep.quantile(k, a)[-1] for a in alphas])
        out[name] = {k: np.asarray(v) for k, v in per.items()}
    return out


def final_means(spec, target, dataset=0):
    """Posterior means of ``target`` at ``t = T`` per filter, shape (R,) each."""
    model = spec.build_model()
    ds = simulate(model, spec.T, spec.seed, dataset)
    out = {}
    for name in spec.filters:
        out[name] = np.array([
            run_filter(model, ds.y, spec.config(name), spec.seed,
                       replication=spec.run_id(dataset, r)).mean(target)[-1]
            for r in range(spec.runs)
        ])
    return out


def iqr(x):
    q75, q25 = np.percentile(x, [75, 25])
    return float(q75 - q25)


# Desk-scale versions of the published setups: parameter values as printed,
# replication counts reduced.
PRESETS = {
    "rao_blackwell": ExperimentSpec(
        theta={"sigma2": 1.0, "tau2": 0.1}, learn=("sigma2", "tau2"),
        model_options={"m0": 0.0, "C0": 10.0, "x0": 0.0,
                       "prior_sigma2": (5.0, 4.0), "prior_tau2": (5.0, 0.4)},
        T=100, n_particles=5000, datasets=1, runs=20, filters=("PL", "PL_SUFF"),
        alphas=(0.25, 0.5, 0.75), target="sigma2"),
    "pure_filter": ExperimentSpec(
        theta={"sigma2": 0.13, "tau2": 0.013},
        model_options={"m0": 0.0, "C0": 10.0, "x0": 0.0},
        T=100, n_particles=1000, datasets=5, runs=5, filters=("BF", "APF", "FABF", "PL")),
    "tau2_learning": ExperimentSpec(
        theta={"sigma2": 0.1, "tau2": 0.01}, learn=("tau2",),
        model_options={"m0": 0.0, "C0": 1.0, "x0": 0.0, "prior_tau2": (10.0, 0.09)},
        T=200, n_particles=1000, datasets=1, runs=20, filters=("BF", "FABF", "PL"),
        alphas=(0.01, 0.5, 0.99), target="tau2"),
    "pl_vs_lw": ExperimentSpec(
        theta={"sigma2": 1.0, "tau2": 0.01, "beta": 0.9}, learn=("beta",),
        model_options={"m0": 0.0, "C0": 1.0, "x0": 0.0, "prior_beta": (1.0, 1.0)},
        T=100, n_particles=2000, datasets=1, runs=20, filters=("PL", "LW"),
        alphas=(0.05, 0.5, 0.95), target="beta", lw_delta=0.95),
    "smoothing": ExperimentSpec(
        theta={"sigma2": 1.0, "tau2": 0.5},
        model_options={"m0": 0.0, "C0": 100.0, "x0": 0.0},
        T=100, n_particles=1000, datasets=1, runs=1, filters=("PL",)),
}


def tau2_learning_spec(sigma2, tau2, **kw):
    """Learning-grid spec for one ``(sigma2, tau2)`` pair with prior ``IG(10, 9 tau2)``."""
    base = PRESETS["tau2_learning"]
    opts = dict(base.model_options, prior_tau2=(10.0, 9.0 * tau2))
    return base.with_(theta={"sigma2": sigma2, "tau2": tau2}, model_options=opts, **kw)


__all__ = [
    "ExperimentSpec", "MetricTable", "METRICS", "PRESETS", "simulate", "mse_table",
    "lrmse_table", "mae_table", "run_replications", "simulate_datasets", "filter_grid",
    "kalman_truth", "pure_filter_experiment", "grid_truth", "learning_experiment",
    "final_quantiles", "final_means", "iqr", "tau2_learning_spec",
]
