"""Sequential filters and the run driver.

Every step function has the signature ``step(model, state, y, rng, config)``
and returns a new :class:`FilterState` whose cloud has uniform weights.
Filters that learn parameters update the conditional sufficient statistics
after the final resample and then draw ``theta ~ p(theta | s)``.

Algorithms
----------
BF        propagate from the transition, weight by the likelihood, resample
APF       first-stage weights at a point guess, propagate, reweight
FABF      propagate from ``p(x_{t+1} | x_t, y_{t+1})``, resample by ``p(y_{t+1} | x_t)``
STORVIK   propagate from a proposal, resample ``(x_t, x_{t+1}, s_t)`` by the
          importance ratio, update ``s``, draw ``theta``
LW        kernel-smoothed parameters on the unconstrained scale, APF weights
PL        resample by ``p(y_{t+1} | z_t)``, then propagate exactly
PL_SUFF   PL carrying Kalman moments ``(m_t, C_t)`` in place of ``x_t``
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import RESAMPLERS, ParticleCloud, resample, take_values
from ._backend import kernels
from .errors import AllWeightsDegenerate, ConfigError, InvalidData, SingularKernelCovariance
from .rng import FILTER, StreamFactory

ALGORITHMS = ("BF", "APF", "FABF", "STORVIK", "LW", "PL", "PL_SUFF")
QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
SUMMARY_COLUMNS = ("mean", "sd", "q01", "q05", "q25", "q50", "q75", "q95", "q99")


@dataclass(frozen=True)
class FilterConfig:
    """Filter settings.

    Attributes
    ----------
    algorithm : str
        One of ``ALGORITHMS``.
    n_particles : int
        Number of particles, at least 2.
    resampler : {"multinomial", "systematic"}
    lw_delta : float
        Liu-West discount in (0, 1); ``a = (3 delta - 1) / (2 delta)``
        and ``h**2 = 1 - a**2``.
    apf_guess : {"mean", "constant"}
        Point guess for the auxiliary first stage: the evolution mean, or a
        constant (uniform first-stage weights).
    storvik_proposal : {"prior", "adapted"}
        Transition density or exact conditional posterior.
    """

    algorithm: str = "PL"
    n_particles: int = 1000
    resampler: str = "multinomial"
    lw_delta: float = 0.95
    apf_guess: str = "mean"
    storvik_proposal: str = "prior"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if int(self.n_particles) != self.n_particles or self.n_particles < 2:
            raise ConfigError(f"n_particles must be an integer >= 2, got {self.n_particles}")
        if self.resampler not in RESAMPLERS:
            raise ConfigError(f"unknown resampler {self.resampler!r}")
        if not 0.0 < self.lw_delta < 1.0:
            raise ConfigError(f"lw_delta must lie in (0, 1), got {self.lw_delta}")
        if self.apf_guess not in ("mean", "constant"):
            raise ConfigError(f"apf_guess must be 'mean' or 'constant', got {self.apf_guess!r}")
        if self.storvik_proposal not in ("prior", "adapted"):
            raise ConfigError(f"storvik_proposal must be 'prior' or 'adapted'")

    @property
    def lw_a(self):
        d = self.lw_delta
        return (3.0 * d - 1.0) / (2.0 * d)

    @property
    def lw_h2(self):
        return 1.0 - self.lw_a ** 2

    @property
    def marginal(self):
        return self.algorithm == "PL_SUFF"


@dataclass
class FilterState:
    """Cloud at time ``t`` with the per-step log predictive increments.

    ``history`` is ``None`` unless smoothing storage was requested, in which
    case it holds one ``(states, thetas)`` record per completed step.
    """

    cloud: ParticleCloud
    t: int = 0
    history: tuple = None
    logpred: tuple = ()

    def advance(self, cloud, log_increment):
        history = self.history
        if history is not None:
            history = history + ((cloud.states, dict(cloud.thetas)),)
        return FilterState(cloud, self.t + 1, history, self.logpred + (log_increment,))


# -- shared pieces --------------------------------------------------------

def _finish(model, cloud, idx, x_prev, x_next, y, aux_prev, aux, rng, state_stats=None,
            thetas=None):
    """Assemble the post-step cloud: update sufficient statistics and draw theta."""
    n = x_next.shape[0]
    if thetas is None:
        thetas = cloud.thetas if idx is None else take_values(cloud.thetas, idx)
    stats = cloud.param_stats
    if idx is not None:
        stats = take_values(stats, idx)
    if model.learn:
        stats = model.update_param_suffstats(stats, x_prev, x_next, y, aux_prev, aux)
        thetas = dict(thetas)
        thetas.update(model.sample_theta(stats, rng, n))
    return ParticleCloud.trusted(states=x_next, aux=aux, param_stats=stats,
                                 state_stats=state_stats, thetas=thetas)


def _pick(v, idx):
    return None if v is None else v[idx]


def _with(cloud, **kw):
    fields = dict(states=cloud.states, logw=cloud.logw, aux=cloud.aux,
                  param_stats=cloud.param_stats, state_stats=cloud.state_stats,
                  thetas=cloud.thetas)
    fields.update(kw)
    return ParticleCloud.trusted(**fields)


def _obs(model, x, y, thetas, aux):
    return model.obs_logdensity(x, y, thetas, aux)


# -- step kernels ---------------------------------------------------------

def step_bootstrap(model, state, y, rng, config):
    """Bootstrap filter: propagate from the transition, then resample."""
    cloud = state.cloud
    aux = model.draw_aux_transition(cloud, rng)
    x_next = model.sample_state_transition(cloud, rng)
    logw = _obs(model, x_next, y, cloud.thetas, aux)
    idx, lm = resample(logw, rng, config.resampler)
    out = _finish(model, cloud, idx, cloud.states[idx], x_next[idx], y,
                  _pick(cloud.aux, idx), _pick(aux, idx), rng)
    return state.advance(out, lm)


def step_apf(model, state, y, rng, config):
    """Auxiliary particle filter with point-guess first-stage weights."""
    cloud = state.cloud
    if model.aux_kind == "continuous":
        cloud = _with(cloud, aux=model.propagate_aux(cloud, y, rng))
    g1 = model.guess_logdensity(cloud, y, config.apf_guess)
    idx1, lm1 = resample(g1, rng, config.resampler)
    cloud = cloud.take(idx1)
    aux_prev = cloud.aux
    if model.aux_kind == "discrete":
        aux = model.draw_aux_transition(cloud, rng)
    else:
        aux = cloud.aux
    x_next = model.sample_state_transition(cloud, rng)
    logw = _obs(model, x_next, y, cloud.thetas, aux) - g1[idx1]
    idx, lm2 = resample(logw, rng, config.resampler)
    aux_prev = aux_prev if model.aux_kind == "discrete" else None
    out = _finish(model, cloud, idx, cloud.states[idx], x_next[idx], y,
                  _pick(aux_prev, idx), _pick(aux, idx), rng)
    return state.advance(out, lm1 + lm2)


def step_fabf(model, state, y, rng, config):
    """Fully adapted propagate-resample filter."""
    cloud = state.cloud
    aux_prev = cloud.aux
    if model.aux_kind == "continuous":
        cloud = _with(cloud, aux=model.propagate_aux(cloud, y, rng))
        aux_prev = None
    logw = model.predictive_logdensity(cloud, y)
    if model.aux_kind == "discrete":
        cloud = _with(cloud, aux=model.propagate_aux(cloud, y, rng))
    x_prev, x_next, _ = model.propagate_state(cloud, y, rng)
    idx, lm = resample(logw, rng, config.resampler)
    out = _finish(model, cloud, idx, x_prev[idx], x_next[idx], y,
                  _pick(aux_prev, idx), _pick(cloud.aux, idx), rng)
    return state.advance(out, lm)


def step_storvik(model, state, y, rng, config):
    """Storvik filter: proposal draw, importance-ratio resample, conjugate update."""
    cloud = state.cloud
    th = cloud.thetas
    aux_prev = cloud.aux
    if config.storvik_proposal == "prior":
        aux = model.draw_aux_transition(cloud, rng)
        x_next = model.sample_state_transition(cloud, rng)
        logq = model.transition_logdensity(x_next, cloud.states, th, aux)
    else:
        if model.aux_kind == "discrete":
            model._unsupported("adapted Storvik proposal needs a regime-marginal density")
        aux = model.propagate_aux(cloud, y, rng) if model.aux_kind else None
        prop = _with(cloud, aux=aux)
        _, x_next, _ = model.propagate_state(prop, y, rng)
        logq = model.posterior_logdensity(x_next, cloud.states, y, th, aux)
    logw = (_obs(model, x_next, y, th, aux)
            + model.transition_logdensity(x_next, cloud.states, th, aux) - logq)
    idx, lm = resample(logw, rng, config.resampler)
    if model.aux_kind != "discrete":
        aux_prev = None
    out = _finish(model, cloud, idx, cloud.states[idx], x_next[idx], y,
                  _pick(aux_prev, idx), _pick(aux, idx), rng)
    return state.advance(out, lm)


def lw_kernel(model, thetas, n, a):
    """Shrinkage locations and kernel Cholesky factor on the unconstrained scale.

    Returns ``(names, m, L)`` with ``m`` of shape (N, d) and ``L`` the
    Cholesky factor of ``(1 - a**2) V``, ``V`` the particle covariance.
    """
    names = model.learn
    if not names:
        return names, np.empty((n, 0)), np.empty((0, 0))
    phi = np.column_stack([model.to_unconstrained(k, np.broadcast_to(thetas[k], (n,)))
                           for k in names])
    mean = phi.mean(axis=0)
    m = a * phi + (1.0 - a) * mean
    h2 = 1.0 - a * a
    if h2 <= 0.0:
        return names, m, np.zeros((len(names), len(names)))
    d = phi - mean
    V = d.T @ d / n
    try:
        L = np.linalg.cholesky(h2 * V)
    except np.linalg.LinAlgError:
        raise SingularKernelCovariance(
            f"kernel covariance of {list(names)} is rank deficient") from None
    if not np.all(np.isfinite(L)) or np.any(np.diag(L) <= 0):
        raise SingularKernelCovariance(f"kernel covariance of {list(names)} is rank deficient")
    return names, m, L


def step_liu_west(model, state, y, rng, config, a=None):
    """Liu-West filter.

    ``a`` overrides the shrinkage implied by ``config.lw_delta``; ``a = 1``
    freezes the parameter atoms and the step reduces to the auxiliary
    particle filter.
    """
    cloud = state.cloud
    n = cloud.size
    a = config.lw_a if a is None else float(a)
    names, m, L = lw_kernel(model, cloud.thetas, n, a)
    th_m = dict(cloud.thetas)
    if a != 1.0:
        for j, k in enumerate(names):
            th_m[k] = model.from_unconstrained(k, m[:, j])
    if model.aux_kind == "continuous":
        cloud = _with(cloud, aux=model.propagate_aux(cloud, y, rng))
    guess_cloud = _with(cloud, thetas=th_m)
    g1 = model.guess_logdensity(guess_cloud, y, config.apf_guess)
    idx1, lm1 = resample(g1, rng, config.resampler)
    th_new = take_values(th_m, idx1)
    if names and L.any():
        phi = m[idx1] + rng.standard_normal((n, len(names))) @ L.T
        for j, k in enumerate(names):
            th_new[k] = model.from_unconstrained(k, phi[:, j])
    moved = ParticleCloud.trusted(states=cloud.states[idx1], aux=_pick(cloud.aux, idx1),
                                  thetas=th_new)
    if model.aux_kind == "discrete":
        aux = model.draw_aux_transition(moved, rng)
    else:
        aux = moved.aux
    x_next = model.sample_state_transition(moved, rng)
    logw = _obs(model, x_next, y, th_new, aux) - g1[idx1]
    idx, lm2 = resample(logw, rng, config.resampler)
    out = ParticleCloud.trusted(states=x_next[idx], aux=_pick(aux, idx),
                                thetas=take_values(th_new, idx))
    return state.advance(out, lm1 + lm2)


def step_pl(model, state, y, rng, config, marginal=None):
    """Particle learning step.

    Continuous auxiliary states are drawn from their prior before the
    resample; discrete ones from their posterior after it.  With
    ``marginal`` (``PL_SUFF``) the predictive and the propagation use the
    particle's Kalman moments.
    """
    cloud = state.cloud
    if marginal is None:
        marginal = config.marginal
    if model.aux_kind == "continuous":
        cloud = _with(cloud, aux=model.propagate_aux(cloud, y, rng))
    if not marginal and config.resampler == "multinomial" and hasattr(model, "fused_arrays"):
        return _fused_pl(model, state, cloud, y, rng)
    logw = model.predictive_logdensity(cloud, y, marginal)
    idx, lm = resample(logw, rng, config.resampler)
    cloud = cloud.take(idx)
    aux_prev = cloud.aux if model.aux_kind == "discrete" else None
    if model.aux_kind == "discrete":
        cloud = _with(cloud, aux=model.propagate_aux(cloud, y, rng, marginal))
    x_prev, x_next, ss = model.propagate_state(cloud, y, rng, marginal)
    out = _finish(model, cloud, None, x_prev, x_next, y, aux_prev, cloud.aux, rng, ss)
    return state.advance(out, lm)


def _fused_pl(model, state, cloud, y, rng):
    # Same draws in the same order as the generic path: n uniforms for the
    # resample, then n normals for the propagation.
    n = cloud.size
    u = rng.random(n)
    z = rng.standard_normal(n)
    idx = np.empty(n, dtype=np.int64)
    x_prev = np.empty(n)
    x_next = np.empty(n)
    beta, s2k, t2 = model.fused_arrays(cloud)
    lm = kernels().pl_scalar_step(cloud.states, float(y), beta, s2k, t2, model.nonlinear,
                                  u, z, idx, x_prev, x_next)
    if lm != lm:
        raise AllWeightsDegenerate("all predictive weights are zero or NaN")
    aux = _pick(cloud.aux, idx)
    out = _finish(model, cloud, idx, x_prev, x_next, y, None, aux, rng)
    return state.advance(out, lm)


STEPS = {
    "BF": step_bootstrap,
    "APF": step_apf,
    "FABF": step_fabf,
    "STORVIK": step_storvik,
    "LW": step_liu_west,
    "PL": step_pl,
    "PL_SUFF": step_pl,
}


def initial_state(model, config, rng, store_history=False):
    cloud = model.initial_cloud(config.n_particles, rng, config.marginal)
    return FilterState(cloud, 0, () if store_history else None, ())


# -- run driver -----------------------------------------------------------

@dataclass
class History:
    """Filtered particles stored for smoothing.

    Attributes
    ----------
    states : ndarray, shape (T, N)
    thetas : dict of str -> ndarray, shape (T, N)
        Learned parameters only.
    aux : ndarray, shape (T, N) or None
    final : ParticleCloud
        Cloud at time T, including sufficient statistics.
    """

    states: np.ndarray
    thetas: dict
    aux: np.ndarray
    final: ParticleCloud

    def __len__(self):
        return self.states.shape[0]


def summarize(samples):
    """Rows ``mean, sd, q01 ... q99`` for a (T, N) sample array."""
    q = np.quantile(samples, QUANTILES, axis=1).T
    return np.column_stack([samples.mean(axis=1), samples.std(axis=1), q])


@dataclass
class RunReport:
    """Output of :func:`run_filter`.

    Attributes
    ----------
    summaries : dict of str -> ndarray, shape (T, 9)
        Per-target ``mean, sd, q01, q05, q25, q50, q75, q95, q99``; targets
        are ``"state"`` and each learned parameter.
    logpred : ndarray, shape (T,)
        Per-step log predictive estimates.
    logml : ndarray, shape (T,)
        Running sum of ``logpred``.
    elapsed_ms : ndarray, shape (T,)
        Wall-clock time since the start of the run at the end of each step.
    regime_prob : ndarray or None
        ``P(l_t = 1 | y^t)`` for models with discrete regimes.
    history : History or None
    """

    algorithm: str
    n_particles: int
    seed: int
    replication: int
    summaries: dict
    logpred: np.ndarray
    logml: np.ndarray
    elapsed_ms: np.ndarray
    regime_prob: np.ndarray = None
    history: History = field(default=None, repr=False)
    final_cloud: ParticleCloud = field(default=None, repr=False)

    @property
    def targets(self):
        return tuple(self.summaries)

    @property
    def T(self):
        return self.logpred.shape[0]

    def column(self, target, name):
        return self.summaries[target][:, SUMMARY_COLUMNS.index(name)]

    def quantile(self, target, alpha):
        return self.column(target, f"q{int(round(alpha * 100)):02d}")

    def mean(self, target="state"):
        return self.column(target, "mean")

    def same_results(self, other):
        """Equality of every output except timings."""
        if self.targets != other.targets:
            return False
        same = all(np.array_equal(self.summaries[k], other.summaries[k]) for k in self.targets)
        same = same and np.array_equal(self.logpred, other.logpred)
        if self.regime_prob is not None or other.regime_prob is not None:
            same = same and np.array_equal(self.regime_prob, other.regime_prob)
        return same


def check_data(data, obs_dim=1):
    """Validate an observation sequence; returns a float array."""
    y = getattr(data, "y", data)
    try:
        y = np.asarray(y, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidData(f"observations are not numeric: {exc}") from None
    if y.ndim == 0 or y.shape[0] == 0:
        raise InvalidData("observation sequence is empty")
    if obs_dim == 1 and y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    expect = 1 if obs_dim == 1 else 2
    if y.ndim != expect or (obs_dim > 1 and y.shape[1] != obs_dim):
        raise InvalidData(f"observations must have shape (T,{'' if obs_dim == 1 else f' {obs_dim}'}), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidData("observations contain NaN or infinite values")
    return y


def run_filter(model, data, config, seed, replication=0, store_history=False):
    """Run a filter over ``data``.

    Parameters
    ----------
    model : StateSpaceModel
    data : array_like or SimulatedData
        Observations, shape (T,) or (T, 2).
    config : FilterConfig
    seed : int
        Unsigned 64-bit seed; the stream for step ``t`` is
        ``(seed, replication, t)``.
    replication : int
    store_history : bool
        Keep per-step particles for smoothing (memory O(T N)).

    Returns
    -------
    RunReport
    """
    y = check_data(data, model.obs_dim)
    if config.marginal and not model.supports_marginal:
        model._unsupported("state sufficient statistics are not available")
    step = STEPS[config.algorithm]
    streams = StreamFactory(seed, replication, FILTER)
    T, N = y.shape[0], config.n_particles
    learned = tuple(model.learn) if config.algorithm != "LW" or model.learn else ()
    states = np.empty((T, N))
    thetas = {k: np.empty((T, N)) for k in learned}
    aux = np.empty((T, N), dtype=np.int64) if model.aux_kind == "discrete" else None
    elapsed = np.empty(T)
    start = time.perf_counter()
    state = initial_state(model, config, streams.at(0))
    for t in range(T):
        state = step(model, state, y[t], streams.at(t + 1), config)
        cloud = state.cloud
        states[t] = cloud.states
        for k in learned:
            thetas[k][t] = cloud.thetas[k]
        if aux is not None:
            aux[t] = cloud.aux
        elapsed[t] = (time.perf_counter() - start) * 1e3
    logpred = np.asarray(state.logpred)
    summaries = {"state": summarize(states)}
    for k in learned:
        summaries[k] = summarize(thetas[k])
    history = History(states, thetas, aux, state.cloud) if store_history else None
    return RunReport(
        algorithm=config.algorithm, n_particles=N, seed=int(seed), replication=int(replication),
        summaries=summaries, logpred=logpred, logml=np.cumsum(logpred), elapsed_ms=elapsed,
        regime_prob=None if aux is None else (aux == 1).mean(axis=1),
        history=history, final_cloud=state.cloud,
    )
