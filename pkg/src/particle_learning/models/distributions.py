"""Densities and conjugate samplers used by the models.

Inverse-gamma variables use the shape-rate convention: ``IG(a, b)`` has
density proportional to ``x**-(a+1) * exp(-b/x)`` and mean ``b/(a-1)``.
"""
import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


def norm_logpdf(x, mean, var):
    """Elementwise normal log-density with variance ``var``."""
    d = x - mean
    return -0.5 * (LOG_2PI + np.log(var) + d * d / var)


def draw_invgamma(rng, shape, rate, size=None):
    """Inverse-gamma draws ``rate / Gamma(shape, 1)``."""
    if size is None:
        size = np.broadcast(shape, rate).shape
    return rate / rng.standard_gamma(shape, size)


def draw_normal(rng, mean, var, size=None):
    if size is None:
        size = np.broadcast(mean, var).shape
    return mean + np.sqrt(var) * rng.standard_normal(size)


def invgamma_mean(shape, rate):
    return rate / (shape - 1.0)


def invgamma_var(shape, rate):
    return rate * rate / ((shape - 1.0) ** 2 * (shape - 2.0))
