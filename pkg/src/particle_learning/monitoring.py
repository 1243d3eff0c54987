"""Sequential marginal likelihood and Bayes factors.

The filters record ``log p^N(y_{t+1} | y^t)``, the log of the particle
average of the predictive densities, at every step.  Cumulative sums give
the log marginal likelihood; differences of two of them give log Bayes
factors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import log_mean_exp
from .errors import LengthMismatch


@dataclass(frozen=True)
class PredictiveTrace:
    """Per-step log predictive increments and their running sum."""

    increments: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "increments", np.asarray(self.increments, dtype=np.float64))

    @classmethod
    def from_report(cls, report):
        return cls(report.logpred)

    @property
    def logml(self):
        """``log p^N(y_1, ..., y_t)`` for every ``t``."""
        return np.cumsum(self.increments)

    def __len__(self):
        return self.increments.shape[0]


def log_predictive_increment(model, cloud, y, marginal=False):
    """``log (1/N) sum_i p(y | z_t^(i))`` for an equally weighted cloud.

    Raises
    ------
    AllWeightsDegenerate
        When every predictive density is zero.
    """
    return log_mean_exp(model.predictive_logdensity(cloud, y, marginal))


def _trace(x):
    if isinstance(x, PredictiveTrace):
        return x
    if hasattr(x, "logpred"):
        return PredictiveTrace.from_report(x)
    return PredictiveTrace(x)


def log_bayes_factor(trace_m1, trace_m0):
    """``log B_t = log p(y^t | M1) - log p(y^t | M0)`` for every ``t``.

    Accepts :class:`PredictiveTrace`, :class:`~particle_learning.filters.RunReport`
    or raw increment arrays.

    Raises
    ------
    LengthMismatch
        When the two traces cover different numbers of observations.
    """
    a, b = _trace(trace_m1), _trace(trace_m0)
    if len(a) != len(b):
        raise LengthMismatch(f"traces have lengths {len(a)} and {len(b)}")
    return a.logml - b.logml


def bayes_factor(trace_m1, trace_m0):
    """``B_t`` in the linear domain (may overflow to inf for long series)."""
    with np.errstate(over="ignore"):
        return np.exp(log_bayes_factor(trace_m1, trace_m0))


__all__ = ["PredictiveTrace", "log_predictive_increment", "log_bayes_factor", "bayes_factor"]
