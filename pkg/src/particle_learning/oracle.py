"""Exact reference computations for the local level (and AR(1)-plus-noise) model.

Kalman filter, backward smoother and likelihood in closed form, plus a
log-spaced grid over ``(sigma2, tau2)`` that gives the joint parameter
posterior and, by mixing Kalman filters over the grid, the state posterior
with parameters integrated out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import ConfigError, GridUnderflow
from .models.distributions import LOG_2PI


@dataclass
class KalmanTrace:
    """Forward Kalman output.

    Attributes
    ----------
    m, C : ndarray, shape (T,)
        Filtered moments of ``x_t | y^t``.
    f, Q : ndarray, shape (T,)
        One-step predictive moments of ``y_t | y^{t-1}``.
    R : ndarray, shape (T,)
        Prior variance of ``x_t | y^{t-1}``.
    loglik_inc : ndarray, shape (T,)
        ``log p(y_t | y^{t-1})``.
    """

    m: np.ndarray
    C: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    loglik_inc: np.ndarray
    m0: float
    C0: float
    beta: float = 1.0

    @property
    def loglik(self):
        """Cumulative exact log-likelihood, shape (T,)."""
        return np.cumsum(self.loglik_inc)

    @property
    def T(self):
        return self.m.shape[0]


@dataclass
class SmootherTrace:
    """Backward smoother output: ``x_t | y^T ~ N(m_t, C_t)``."""

    m: np.ndarray
    C: np.ndarray
    D: np.ndarray


def _as_series(y):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim != 1:
        raise ValueError(f"expected a univariate series, got shape {y.shape}")
    return y


def kalman_filter(y, sigma2, tau2, m0=0.0, C0=1.0, beta=1.0):
    """Kalman filter for ``y_t = x_t + e_t``, ``x_t = beta x_{t-1} + w_t``.

    Parameters
    ----------
    y : array_like, shape (T,)
    sigma2, tau2 : float
        Observation and evolution variances.
    m0, C0 : float
        Moments of ``x_0``.
    beta : float
        Evolution coefficient; 1 gives the local level model.

    Returns
    -------
    KalmanTrace
    """
    if not (sigma2 > 0 and tau2 >= 0 and C0 >= 0):
        raise ConfigError("need sigma2 > 0, tau2 >= 0 and C0 >= 0")
    y = _as_series(y)
    T = y.shape[0]
    out = {k: np.empty(T) for k in ("m", "C", "f", "Q", "R", "ll")}
    m, C = float(m0), float(C0)
    for t in range(T):
        a = beta * m
        R = beta * beta * C + tau2
        Q = R + sigma2
        e = y[t] - a
        A = R / Q
        m = a + A * e
        C = A * sigma2
        out["m"][t], out["C"][t], out["f"][t], out["Q"][t], out["R"][t] = m, C, a, Q, R
        out["ll"][t] = -0.5 * (LOG_2PI + np.log(Q) + e * e / Q)
    return KalmanTrace(out["m"], out["C"], out["f"], out["Q"], out["R"], out["ll"],
                       float(m0), float(C0), float(beta))


def kalman_loglik(y, sigma2, tau2, m0=0.0, C0=1.0, beta=1.0):
    """Exact ``log p(y_1, ..., y_T)``."""
    return float(kalman_filter(y, sigma2, tau2, m0, C0, beta).loglik_inc.sum())


def kalman_smoother(trace, tau2):
    """Rauch-Tung-Striebel backward pass over a :class:`KalmanTrace`.

    ``D_t = beta C_t / (beta^2 C_t + tau2)``; ``m_T`` and ``C_T`` are copied
    unchanged from the filter.
    """
    T = trace.T
    b = trace.beta
    ms, Cs, D = np.empty(T), np.empty(T), np.zeros(T)
    ms[-1], Cs[-1] = trace.m[-1], trace.C[-1]
    for t in range(T - 2, -1, -1):
        C = trace.C[t]
        R = b * b * C + tau2
        d = b * C / R if R > 0 else 0.0
        D[t] = d
        ms[t] = trace.m[t] + d * (ms[t + 1] - b * trace.m[t])
        Cs[t] = C + d * d * (Cs[t + 1] - R)
    return SmootherTrace(ms, Cs, D)


def kalman_quantiles(m, C, alphas):
    """Normal quantiles ``m + sqrt(C) z_alpha``, shape (T, len(alphas))."""
    z = stats.norm.ppf(np.asarray(alphas, dtype=np.float64))
    return np.asarray(m)[:, None] + np.sqrt(np.asarray(C))[:, None] * z[None, :]


# -- grid posterior ---------------------------------------------------------

def invgamma_logpdf(x, shape, rate):
    return shape * np.log(rate) - special.gammaln(shape) - (shape + 1) * np.log(x) - rate / x


def _axis(shape, rate, n, lo, hi, bounds=None):
    if bounds is None:
        bounds = stats.invgamma.ppf([lo, hi], shape, scale=rate)
    edges = np.geomspace(bounds[0], bounds[1], n + 1)
    mass = np.diff(stats.invgamma.cdf(edges, shape, scale=rate))
    return edges, np.sqrt(edges[:-1] * edges[1:]), mass


@dataclass
class GridPosterior:
    """Joint posterior of ``(sigma2, tau2)`` on a log-spaced grid.

    Attributes
    ----------
    sigma2, tau2 : ndarray, shape (n,)
        Cell centres (geometric midpoints of the cell edges).
    sigma2_edges, tau2_edges : ndarray, shape (n + 1,)
    log_prior : ndarray, shape (n, n)
        Log of prior density times cell area; rows index ``sigma2``.
    mass : ndarray, shape (n, n)
        Normalized posterior mass per cell.
    loglik : ndarray, shape (n, n)
        Exact Kalman log-likelihood at the cell centres.
    """

    sigma2: np.ndarray
    tau2: np.ndarray
    sigma2_edges: np.ndarray
    tau2_edges: np.ndarray
    log_prior: np.ndarray
    mass: np.ndarray
    loglik: np.ndarray

    def marginal(self, name):
        """``(centres, mass)`` of one parameter."""
        if name == "sigma2":
            return self.sigma2, self.mass.sum(axis=1)
        if name == "tau2":
            return self.tau2, self.mass.sum(axis=0)
        raise KeyError(name)

    def mean(self, name):
        x, w = self.marginal(name)
        return float(w @ x)

    def sd(self, name):
        x, w = self.marginal(name)
        mu = w @ x
        return float(np.sqrt(w @ (x - mu) ** 2))

    def quantile(self, name, alpha):
        return _grid_quantile(*self.marginal(name), self._edges(name), alpha)

    def _edges(self, name):
        return self.sigma2_edges if name == "sigma2" else self.tau2_edges


def _grid_quantile(x, w, edges, alpha):
    # piecewise-linear CDF on the cell edges (log scale inside a cell)
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    alpha = np.asarray(alpha, dtype=np.float64)
    return np.exp(np.interp(alpha, cdf, np.log(edges)))


def _normalize(logpost):
    top = np.max(logpost)
    if not np.isfinite(top):
        raise GridUnderflow("every grid cell has zero or undefined posterior density")
    w = np.exp(logpost - top)
    return w / w.sum()


def _grid_axes(prior_sigma2, prior_tau2, n, lo, hi, sigma2_bounds, tau2_bounds, sigma2=None):
    if n < 2:
        raise ConfigError(f"grid needs at least 2 cells per axis, got {n}")
    if not 0.0 <= lo < hi <= 1.0:
        raise ConfigError(f"grid quantile range must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})")
    if sigma2 is None:
        es, cs, ms = _axis(*prior_sigma2, n, lo, hi, sigma2_bounds)
    else:
        # known observation variance: a single degenerate cell
        if not sigma2 > 0:
            raise ConfigError(f"sigma2 must be positive, got {sigma2}")
        es, cs, ms = np.array([sigma2, sigma2]), np.array([float(sigma2)]), np.array([1.0])
    et, ct, mt = _axis(*prior_tau2, n, lo, hi, tau2_bounds)
    for name, m in (("sigma2", ms), ("tau2", mt)):
        if m.sum() < 0.999 - 1e-12:
            raise ConfigError(f"{name} grid covers only {m.sum():.5f} of the prior mass (need 0.999)")
    with np.errstate(divide="ignore"):
        log_prior = np.log(ms)[:, None] + np.log(mt)[None, :]
    return es, cs, et, ct, log_prior


def grid_param_posterior(y, prior_sigma2=(5.0, 4.0), prior_tau2=(5.0, 0.4), m0=0.0, C0=1.0,
                         n=200, lo=0.0005, hi=0.9995, sigma2_bounds=None, tau2_bounds=None,
                         sigma2=None):
    """Grid posterior of ``(sigma2, tau2)`` for the local level model.

    Parameters
    ----------
    y : array_like, shape (T,)
        May be empty, in which case the result is the prior on the grid.
    prior_sigma2, prior_tau2 : (shape, rate)
        Inverse-gamma priors.
    n : int
        Cells per axis.
    lo, hi : float
        Prior quantiles spanned by each axis.
    sigma2_bounds, tau2_bounds : (float, float), optional
        Explicit axis ranges; must still hold 99.9% of the prior mass.
    sigma2 : float, optional
        Known observation variance; the grid then spans ``tau2`` only.

    Returns
    -------
    GridPosterior

    Notes
    -----
    Each cell carries its exact prior mass, so the grid prior sums to the
    covered prior probability before normalization.  The likelihood is
    evaluated at the cell centre.
    """
    y = _as_series(y)
    es, cs, et, ct, log_prior = _grid_axes(prior_sigma2, prior_tau2, n, lo, hi,
                                           sigma2_bounds, tau2_bounds, sigma2)
    shape = log_prior.shape
    s2 = cs[:, None] * np.ones((1, n))
    t2 = np.ones((shape[0], 1)) * ct[None, :]
    ll = np.zeros(shape)
    m = np.full(shape, float(m0))
    C = np.full(shape, float(C0))
    for yt in y:
        R = C + t2
        Q = R + s2
        e = yt - m
        ll -= 0.5 * (LOG_2PI + np.log(Q) + e * e / Q)
        A = R / Q
        m = m + A * e
        C = A * s2
    mass = _normalize(log_prior + ll)
    return GridPosterior(cs, ct, es, et, log_prior, mass, ll)


@dataclass
class GridSequential:
    """Per-t posterior quantiles with parameters integrated over the grid.

    Attributes
    ----------
    alphas : ndarray
    state, sigma2, tau2 : ndarray, shape (T, len(alphas))
        Quantiles of ``p(x_t | y^t)``, ``p(sigma2 | y^t)``, ``p(tau2 | y^t)``.
    state_mean : ndarray, shape (T,)
    """

    alphas: np.ndarray
    state: np.ndarray
    sigma2: np.ndarray
    tau2: np.ndarray
    state_mean: np.ndarray


def _mixture_quantiles(w, mu, sd, alphas, iters=60):
    # bisection on the CDF of a normal mixture
    z = stats.norm.ppf(alphas)
    lo = np.full(len(alphas), np.min(mu[:, None] + sd[:, None] * z[None, :], axis=0))
    hi = np.full(len(alphas), np.max(mu[:, None] + sd[:, None] * z[None, :], axis=0))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        cdf = w @ special.ndtr((mid[None, :] - mu[:, None]) / sd[:, None])
        below = cdf < alphas
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def grid_sequential_quantiles(y, alphas, prior_sigma2=(5.0, 4.0), prior_tau2=(5.0, 0.4),
                              m0=0.0, C0=1.0, n=200, lo=0.0005, hi=0.9995, prune=1e-10,
                              sigma2=None):
    """Sequential quantiles of the state and both variances, parameters integrated out.

    At each ``t`` the state posterior is a mixture of the per-cell Kalman
    filters weighted by the grid posterior mass ``p(sigma2, tau2 | y^t)``.
    Cells whose mass falls below ``prune`` times the largest cell mass are
    dropped from the state mixture only.  With ``sigma2`` given the grid
    spans ``tau2`` alone and the ``sigma2`` quantiles are constant.

    Returns
    -------
    GridSequential
    """
    y = _as_series(y)
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(alphas <= 0) or np.any(alphas >= 1):
        raise ConfigError("quantile levels must lie strictly inside (0, 1)")
    es, cs, et, ct, log_prior = _grid_axes(prior_sigma2, prior_tau2, n, lo, hi, None, None,
                                           sigma2)
    ns = cs.shape[0]
    s2 = np.repeat(cs, n)
    t2 = np.tile(ct, ns)
    lp = log_prior.ravel()
    ll = np.zeros(ns * n)
    m = np.full(ns * n, float(m0))
    C = np.full(ns * n, float(C0))
    T = y.shape[0]
    k = alphas.shape[0]
    out = {name: np.empty((T, k)) for name in ("state", "sigma2", "tau2")}
    mean = np.empty(T)
    for t in range(T):
        R = C + t2
        Q = R + s2
        e = y[t] - m
        ll -= 0.5 * (LOG_2PI + np.log(Q) + e * e / Q)
        A = R / Q
        m = m + A * e
        C = A * s2
        w = _normalize(lp + ll)
        W = w.reshape(ns, n)
        out["sigma2"][t] = _grid_quantile(cs, W.sum(axis=1), es, alphas)
        out["tau2"][t] = _grid_quantile(ct, W.sum(axis=0), et, alphas)
        keep = w > prune * w.max()
        wk = w[keep] / w[keep].sum()
        mean[t] = wk @ m[keep]
        out["state"][t] = _mixture_quantiles(wk, m[keep], np.sqrt(C[keep]), alphas)
    return GridSequential(alphas, out["state"], out["sigma2"], out["tau2"], mean)


__all__ = [
    "KalmanTrace", "SmootherTrace", "GridPosterior", "GridSequential",
    "kalman_filter", "kalman_loglik", "kalman_smoother", "kalman_quantiles",
    "grid_param_posterior", "grid_sequential_quantiles", "invgamma_logpdf",
]
