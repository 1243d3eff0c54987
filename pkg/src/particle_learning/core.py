"""Particle containers, weight arithmetic and resampling.

Indices returned by the resamplers are 0-based positions into the particle
arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend
from .errors import AllWeightsDegenerate, LengthMismatch

RESAMPLERS = ("multinomial", "systematic")


def _check_logw(logw):
    logw = np.ascontiguousarray(logw, dtype=np.float64)
    if logw.ndim != 1 or logw.shape[0] == 0:
        raise LengthMismatch("log-weights must be a non-empty vector")
    return logw


def _degenerate(logw):
    if np.isnan(logw).any():
        return AllWeightsDegenerate("NaN log-weight")
    if np.isposinf(logw).any():
        return AllWeightsDegenerate("+inf log-weight")
    return AllWeightsDegenerate(f"all {logw.shape[0]} log-weights are -inf")


def normalize_weights(logw):
    """Normalize log-weights.

    Parameters
    ----------
    logw : array_like, shape (N,)
        Unnormalized log-weights.

    Returns
    -------
    weights : ndarray, shape (N,)
        Probability vector.
    log_mean : float
        ``log(mean(exp(logw)))``, computed after a max shift.

    Raises
    ------
    AllWeightsDegenerate
        No finite entry, or a NaN/+inf entry.
    """
    logw = _check_logw(logw)
    m = logw.max()
    if not np.isfinite(m) or np.isnan(logw).any():
        raise _degenerate(logw)
    w = np.exp(logw - m)
    total = w.sum()
    return w / total, float(m + np.log(total / logw.shape[0]))


def log_mean_exp(logw):
    """``log(mean(exp(logw)))`` without forming the weights."""
    logw = _check_logw(logw)
    out = _backend.kernels().log_mean_exp(logw)
    if np.isnan(out):
        raise _degenerate(logw)
    return float(out)


def ess(weights):
    """Effective sample size ``1 / sum(w**2)`` of normalized weights."""
    w = np.asarray(weights, dtype=np.float64)
    return float(1.0 / np.dot(w, w))


def _check_weights(weights):
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] == 0:
        raise LengthMismatch("weights must be a non-empty vector")
    if not np.all(np.isfinite(w)) or (w < 0).any() or w.sum() <= 0:
        raise AllWeightsDegenerate("weights must be finite, non-negative and not all zero")
    return w


def resample_multinomial(weights, n, rng):
    """Draw ``n`` i.i.d. indices with ``P(i) = weights[i]``, in draw order."""
    w = _check_weights(weights)
    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.random(n)
    return _backend.kernels().inverse_cdf(np.cumsum(w), u)


def resample_systematic(weights, n, rng):
    """Systematic resampling with a single uniform offset.

    Each count satisfies ``|count_i - n * w_i| < 1``.
    """
    w = _check_weights(weights)
    if n < 1:
        raise ValueError("n must be >= 1")
    u = (np.arange(n) + rng.random()) / n
    return _backend.kernels().inverse_cdf(np.cumsum(w), u)


def resample(logw, rng, scheme="multinomial", n=None):
    """Resample directly from log-weights.

    Returns
    -------
    idx : ndarray of int64
    log_mean : float
        Log of the mean unnormalized weight, the per-step marginal
        likelihood increment.
    """
    logw = _check_logw(logw)
    n = logw.shape[0] if n is None else int(n)
    idx = np.empty(n, dtype=np.int64)
    k = _backend.kernels()
    if scheme == "multinomial":
        lm = k.multinomial_logw(logw, rng.random(n), idx)
    elif scheme == "systematic":
        lm = k.systematic_logw(logw, float(rng.random()), idx)
    else:
        raise ValueError(f"unknown resampler {scheme!r}")
    if np.isnan(lm):
        raise _degenerate(logw)
    return idx, float(lm)


def is_vector(v):
    return isinstance(v, np.ndarray) and v.ndim > 0


def take_values(d, idx):
    """Index every per-particle array of a dict; scalars are shared and kept."""
    return {k: (v[idx] if is_vector(v) else v) for k, v in d.items()}


@dataclass
class ParticleCloud:
    """Population of particles.

    Attributes
    ----------
    states : ndarray, shape (N,)
        Current states ``x_t``.
    logw : ndarray, shape (N,) or None
        Log-weights; ``None`` means uniform, the state after a resample.
    aux : ndarray or None
        Auxiliary states (regime labels or scale mixing variables).
    param_stats : dict of str -> ndarray
        Per-particle sufficient-statistic accumulators.
    state_stats : dict or None
        Kalman moments ``{"m": ..., "C": ...}`` for marginalized variants.
    thetas : dict of str -> ndarray or float
        Parameter values; learned parameters are per-particle arrays, known
        ones are scalars shared by all particles.
    """

    states: np.ndarray
    logw: np.ndarray = None
    aux: np.ndarray = None
    param_stats: dict = field(default_factory=dict)
    state_stats: dict = None
    thetas: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        n = self.states.shape[0]
        if self.logw is None:
            self.logw = np.zeros(n)
        for name, v in self._vectors():
            if np.shape(v)[0] != n:
                raise LengthMismatch(f"{name} has length {np.shape(v)[0]}, expected {n}")

    @classmethod
    def trusted(cls, states, logw=None, aux=None, param_stats=None, state_stats=None,
                thetas=None):
        """Construct without validation; for filter internals that keep lengths aligned."""
        self = object.__new__(cls)
        self.states = states
        self.logw = logw
        self.aux = aux
        self.param_stats = {} if param_stats is None else param_stats
        self.state_stats = state_stats
        self.thetas = {} if thetas is None else thetas
        return self

    def _vectors(self):
        if self.logw is not None:
            yield "logw", self.logw
        if self.aux is not None:
            yield "aux", self.aux
        for k, v in self.param_stats.items():
            if is_vector(v):
                yield f"param_stats[{k}]", v
        if self.state_stats is not None:
            for k, v in self.state_stats.items():
                yield f"state_stats[{k}]", v
        for k, v in self.thetas.items():
            if is_vector(v):
                yield f"thetas[{k}]", v

    def validate(self):
        self.__post_init__()
        return self

    @property
    def size(self):
        return self.states.shape[0]

    @property
    def weights(self):
        if self.logw is None:
            return np.full(self.size, 1.0 / self.size)
        return normalize_weights(self.logw)[0]

    def take(self, idx):
        """Cloud made of the particles at ``idx`` with uniform weights."""
        return ParticleCloud.trusted(
            states=self.states[idx],
            aux=None if self.aux is None else self.aux[idx],
            param_stats=take_values(self.param_stats, idx),
            state_stats=None if self.state_stats is None else take_values(self.state_stats, idx),
            thetas=take_values(self.thetas, idx),
        )

    def with_(self, **changes):
        return replace(self, **changes)

    def theta_array(self, name):
        """Parameter ``name`` broadcast to shape (N,)."""
        return np.broadcast_to(np.asarray(self.thetas[name], dtype=np.float64), (self.size,))
