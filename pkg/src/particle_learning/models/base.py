"""Model interface shared by all state-space models.

Every method is vectorized over a :class:`~particle_learning.core.ParticleCloud`.
Learned parameters live in the cloud as per-particle arrays; known ones are
scalars.  Parameter sufficient statistics are raw accumulators (sums of
squares and cross products) from which the conjugate hyperparameters are
recomputed on demand, so the posterior for any prior follows from the same
accumulator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ParticleCloud
from ..errors import ConfigError, UnsupportedConditioningSet


@dataclass
class SimulatedData:
    """Simulated observations with the latent paths that produced them.

    Attributes
    ----------
    y : ndarray, shape (T,) or (T, d)
    x : ndarray, shape (T,)
    aux : ndarray or None
        Latent auxiliary states (regimes or scale mixing variables).
    x0 : float
        Initial state.
    """

    y: np.ndarray
    x: np.ndarray
    aux: np.ndarray = None
    x0: float = 0.0


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _expit(z):
    return 1.0 / (1.0 + np.exp(-z))


class StateSpaceModel:
    """Base class.

    Subclasses set ``params`` (all parameter names), ``positive`` and
    ``unit`` (parameters constrained to ``(0, inf)`` and ``(0, 1)``), and
    implement the density and propagation methods.

    Parameters
    ----------
    theta : dict
        Parameter values; true values for simulation, fixed values for the
        parameters that are not learned.
    learn : sequence of str
        Parameters learned through conditional sufficient statistics.
    m0, C0 : float
        Prior mean and variance of the initial state.
    x0 : float, optional
        Initial state used by :meth:`simulate`; drawn from the prior when
        omitted.
    """

    name = "model"
    params = ()
    positive = ()
    unit = ()
    obs_dim = 1
    aux_kind = None
    supports_marginal = False

    def __init__(self, theta, learn=(), m0=0.0, C0=1.0, x0=None):
        unknown = set(theta) - set(self.params)
        if unknown:
            raise ConfigError(f"{self.name}: unknown parameters {sorted(unknown)}")
        missing = [p for p in self.params if p not in theta]
        if missing:
            raise ConfigError(f"{self.name}: missing parameters {missing}")
        learn = tuple(learn)
        bad = [p for p in learn if p not in self.learnable]
        if bad:
            raise ConfigError(f"{self.name}: cannot learn {bad}; learnable are {list(self.learnable)}")
        self.theta = {k: float(v) for k, v in theta.items()}
        for k in self.positive:
            if not self.theta[k] >= 0:
                raise ConfigError(f"{k} must be non-negative, got {self.theta[k]}")
        for k in self.unit:
            if not 0.0 <= self.theta[k] <= 1.0:
                raise ConfigError(f"{k} must lie in [0, 1], got {self.theta[k]}")
        if not C0 >= 0:
            raise ConfigError(f"C0 must be non-negative, got {C0}")
        self.learn = tuple(p for p in self.learnable if p in learn)
        self.m0 = float(m0)
        self.C0 = float(C0)
        self.x0 = None if x0 is None else float(x0)

    learnable = ()

    def __repr__(self):
        return f"{type(self).__name__}(theta={self.theta}, learn={self.learn})"

    # -- parameters -------------------------------------------------------
    def known_thetas(self):
        return {k: v for k, v in self.theta.items() if k not in self.learn}

    def with_theta(self, **changes):
        """Copy of the model with some parameter values replaced."""
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.theta = dict(self.theta, **{k: float(v) for k, v in changes.items()})
        return new

    def to_unconstrained(self, name, values):
        if name in self.positive:
            return np.log(values)
        if name in self.unit:
            return _logit(values)
        return np.asarray(values, dtype=np.float64)

    def from_unconstrained(self, name, values):
        if name in self.positive:
            return np.exp(values)
        if name in self.unit:
            return _expit(values)
        return values

    # -- helpers ----------------------------------------------------------
    def particle(self, x=0.0, m=None, C=None, aux=None, **theta):
        """One-particle cloud, convenient for evaluating single densities."""
        th = dict(self.theta)
        th.update({k: float(v) for k, v in theta.items()})
        state_stats = None
        if m is not None or C is not None:
            state_stats = {"m": np.array([float(x if m is None else m)]),
                           "C": np.array([0.0 if C is None else float(C)])}
        return ParticleCloud(
            states=np.array([float(x)]),
            aux=None if aux is None else np.array([aux]),
            state_stats=state_stats,
            thetas=th,
        )

    def _unsupported(self, what):
        raise UnsupportedConditioningSet(f"{self.name}: {what}")

    # -- interface --------------------------------------------------------
    def initial_cloud(self, n, rng, marginal=False):
        raise NotImplementedError

    def predictive_logdensity(self, cloud, y, marginal=False):
        raise NotImplementedError

    def propagate_aux(self, cloud, y, rng, marginal=False):
        """New auxiliary states; ``None`` for models without one."""
        return None

    def propagate_state(self, cloud, y, rng, marginal=False):
        raise NotImplementedError

    def update_state_suffstats(self, cloud, y):
        raise NotImplementedError

    def draw_aux_transition(self, cloud, rng):
        """Auxiliary states drawn from their transition law."""
        return None

    def sample_state_transition(self, cloud, rng):
        """``x_{t+1}`` drawn from the state transition."""
        raise NotImplementedError

    def obs_logdensity(self, x, y, thetas, aux=None):
        raise NotImplementedError

    def transition_logdensity(self, x_next, x, thetas, aux=None):
        raise NotImplementedError

    def posterior_logdensity(self, x_next, x, y, thetas, aux=None):
        raise NotImplementedError

    def guess_logdensity(self, cloud, y, guess="mean"):
        raise NotImplementedError

    def evolution_mean(self, x, thetas):
        raise NotImplementedError

    def transition_basis(self, x):
        """``g(x)`` such that the transition mean is ``coef * g(x)``."""
        return x

    def evolution_coefficients(self, thetas):
        """``(coef, var)`` of the Gaussian transition."""
        raise NotImplementedError

    def empty_stats(self, n):
        raise NotImplementedError

    def update_param_suffstats(self, stats, x_prev, x_next, y, aux_prev=None, aux=None):
        raise NotImplementedError

    def hyperparameters(self, stats):
        raise NotImplementedError

    def sample_theta(self, stats, rng, n):
        raise NotImplementedError

    def sample_prior(self, n, rng):
        return self.sample_theta(self.empty_stats(n), rng, n)

    def simulate(self, T, rng):
        raise NotImplementedError
