"""Particle learning for state-space models.

Sequential state filtering with conjugate parameter learning, backward
smoothing, marginal-likelihood monitoring, comparator filters and exact
oracles for the local level model.
"""
from ._backend import backend_name, set_backend
from .core import ParticleCloud, ess, normalize_weights, resample_multinomial, resample_systematic
from .filters import FilterConfig, RunReport, run_filter
from .models import DynamicFactor, HeavyTailed, LocalLevel, build_model
from .monitoring import PredictiveTrace, bayes_factor, log_bayes_factor
from .oracle import grid_param_posterior, kalman_filter, kalman_smoother
from .smoothing import SmoothedDraws, backward_smooth

__version__ = "0.1.0"

__all__ = [
    "DynamicFactor", "FilterConfig", "HeavyTailed", "LocalLevel", "ParticleCloud",
    "PredictiveTrace", "RunReport", "SmoothedDraws", "backend_name", "backward_smooth",
    "bayes_factor", "build_model", "ess", "grid_param_posterior", "kalman_filter",
    "kalman_smoother", "log_bayes_factor", "normalize_weights", "resample_multinomial",
    "resample_systematic", "run_filter", "set_backend",
]
