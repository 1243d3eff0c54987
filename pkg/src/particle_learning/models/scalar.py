"""Scalar Gaussian state-space models.

Both models share the form::

    y_t     = x_t + sqrt(k_t * sigma2) * e_t
    x_{t+1} = beta * g(x_t) + sqrt(tau2) * w_t

with ``k_t = 1`` and ``g`` the identity for the local level model, and
``k_t = lambda_t ~ IG(nu/2, nu/2)`` and ``g(x) = x / (1 + x**2)`` for the
heavy-tailed model.

Conjugate priors: ``sigma2 ~ IG(a0, b0)``, ``tau2 ~ IG(c0, d0)``.  For
``beta`` the prior is ``N(b0, B0)`` when ``tau2`` is known and
``N(b0, tau2 * B0)`` (normal-inverse-gamma) when both are learned.
"""
from __future__ import annotations

import numpy as np

from ..core import ParticleCloud
from ..errors import ConfigError
from .base import SimulatedData, StateSpaceModel
from .distributions import LOG_2PI, draw_invgamma, norm_logpdf


def _pair(v, name):
    a, b = (float(x) for x in v)
    if not (a > 0 and b > 0):
        raise ConfigError(f"{name} hyperparameters must be positive, got {v}")
    return a, b


def _vec(v):
    if type(v) is np.ndarray and v.dtype == np.float64 and v.ndim == 1:
        return v
    return np.atleast_1d(np.asarray(v, dtype=np.float64))


class ScalarModel(StateSpaceModel):
    params = ("sigma2", "tau2", "beta")
    learnable = ("sigma2", "tau2", "beta")
    positive = ("sigma2", "tau2")
    nonlinear = False

    def __init__(self, sigma2, tau2, beta=1.0, learn=(), prior_sigma2=(5.0, 4.0),
                 prior_tau2=(5.0, 0.4), prior_beta=(1.0, 1.0), m0=0.0, C0=10.0, x0=None,
                 **extra):
        theta = {"sigma2": sigma2, "tau2": tau2, "beta": beta}
        theta.update(extra)
        super().__init__(theta, learn=learn, m0=m0, C0=C0, x0=x0)
        self.prior_sigma2 = _pair(prior_sigma2, "prior_sigma2")
        self.prior_tau2 = _pair(prior_tau2, "prior_tau2")
        b0, B0 = (float(x) for x in prior_beta)
        if not B0 > 0:
            raise ConfigError(f"prior_beta variance must be positive, got {B0}")
        self.prior_beta = (b0, B0)

    # -- structure --------------------------------------------------------
    def g(self, x):
        return x

    def transition_basis(self, x):
        return self.g(x)

    def evolution_mean(self, x, thetas):
        return thetas["beta"] * self.g(x)

    def evolution_coefficients(self, thetas):
        return thetas["beta"], thetas["tau2"]

    def _kappa(self, aux):
        return 1.0

    # -- initialization ---------------------------------------------------
    def empty_stats(self, n):
        if not self.learn:
            return {}
        keys = ("syy", "syx", "sxx", "spp", "sxp") + (("sxe",) if self.aux_kind else ())
        stats = {k: np.zeros(n) for k in keys}
        stats["n"] = np.float64(0.0)
        return stats

    def initial_cloud(self, n, rng, marginal=False):
        if marginal and not self.supports_marginal:
            self._unsupported("no state sufficient statistics for a nonlinear evolution")
        stats = self.empty_stats(n)
        thetas = self.sample_theta(stats, rng, n)
        x = self.m0 + np.sqrt(self.C0) * rng.standard_normal(n)
        state_stats = None
        if marginal:
            state_stats = {"m": np.full(n, self.m0), "C": np.full(n, self.C0)}
        aux = np.ones(n) if self.aux_kind else None
        return ParticleCloud(states=x, aux=aux, param_stats=stats,
                             state_stats=state_stats, thetas=thetas)

    # -- densities --------------------------------------------------------
    def predictive_logdensity(self, cloud, y, marginal=False):
        """``log p(y_{t+1} | z_t)`` for every particle.

        With ``marginal=True`` the state is integrated out against the
        particle's Kalman moments ``(m_t, C_t)``.
        """
        th = cloud.thetas
        b = th["beta"]
        if marginal:
            if not self.supports_marginal:
                self._unsupported("predictive given (m, C) requires a linear evolution")
            ss = cloud.state_stats
            return norm_logpdf(y, b * ss["m"], b * b * ss["C"] + th["tau2"] + th["sigma2"])
        var = self._kappa(cloud.aux) * th["sigma2"] + th["tau2"]
        return norm_logpdf(y, b * self.g(cloud.states), var)

    def obs_logdensity(self, x, y, thetas, aux=None):
        return norm_logpdf(y, x, self._kappa(aux) * thetas["sigma2"])

    def transition_logdensity(self, x_next, x, thetas, aux=None):
        return norm_logpdf(x_next, thetas["beta"] * self.g(x), thetas["tau2"])

    def _posterior_moments(self, x, y, thetas, aux):
        a = thetas["beta"] * self.g(x)
        R = thetas["tau2"]
        V = self._kappa(aux) * thetas["sigma2"]
        A = R / (R + V)
        return a + A * (y - a), A * V

    def posterior_logdensity(self, x_next, x, y, thetas, aux=None):
        mu, var = self._posterior_moments(x, y, thetas, aux)
        return norm_logpdf(x_next, mu, var)

    def guess_logdensity(self, cloud, y, guess="mean"):
        """First-stage auxiliary weights ``log p(y | g(x_t))``."""
        if guess == "constant":
            return np.zeros(cloud.size)
        th = cloud.thetas
        return norm_logpdf(y, self.evolution_mean(cloud.states, th),
                           self._kappa(cloud.aux) * th["sigma2"])

    def fused_arrays(self, cloud):
        """``(beta, obs_var, tau2)`` as 1-d arrays for the fused PL kernel.

        Known parameters become length-1 arrays shared by every particle.
        """
        th = cloud.thetas
        return (_vec(th["beta"]), _vec(self._kappa(cloud.aux) * th["sigma2"]),
                _vec(th["tau2"]))

    # -- propagation ------------------------------------------------------
    def propagate_state(self, cloud, y, rng, marginal=False):
        """Draw ``x_{t+1}`` from its exact conditional posterior.

        Returns
        -------
        x_prev, x_next : ndarray
            The pair fed to the parameter sufficient statistics.
        state_stats : dict or None
            Updated Kalman moments when ``marginal`` is set.

        Notes
        -----
        With ``marginal=True`` the particle carries ``(m_t, C_t)`` instead of
        ``x_t``.  ``x_{t+1}`` is drawn from ``N(m_{t+1}, C_{t+1})`` and
        ``x_t`` from ``p(x_t | x_{t+1}, m_t, C_t)``, which together form an
        exact draw of the pair given the particle.
        """
        th = cloud.thetas
        n = cloud.size
        if marginal:
            b, t2 = th["beta"], th["tau2"]
            m, C = cloud.state_stats["m"], cloud.state_stats["C"]
            z = rng.standard_normal((2, n))
            new = self.update_state_suffstats(cloud, y)
            x_next = new["m"] + np.sqrt(new["C"]) * z[0]
            a = b * m
            R = b * b * C + t2
            G = np.divide(C * b, R, out=np.zeros(np.broadcast(C, R).shape), where=R > 0)
            x_prev = m + G * (x_next - a) + np.sqrt(np.maximum(C - G * b * C, 0.0)) * z[1]
            return x_prev, x_next, new
        z = rng.standard_normal(n)
        mu, var = self._posterior_moments(cloud.states, y, th, cloud.aux)
        return cloud.states, mu + np.sqrt(var) * z, None

    def update_state_suffstats(self, cloud, y):
        """Kalman map ``(m_t, C_t) -> (m_{t+1}, C_{t+1})``."""
        if not self.supports_marginal:
            self._unsupported("no state sufficient statistics for a nonlinear evolution")
        th = cloud.thetas
        b = th["beta"]
        m, C = cloud.state_stats["m"], cloud.state_stats["C"]
        a = b * m
        R = b * b * C + th["tau2"]
        V = th["sigma2"]
        A = np.divide(R, R + V, out=np.zeros(np.broadcast(R, V).shape), where=(R + V) > 0)
        return {"m": a + A * (y - a), "C": A * V}

    def draw_aux_transition(self, cloud, rng):
        return self.draw_aux_prior(cloud.size, rng) if self.aux_kind else None

    def sample_state_transition(self, cloud, rng):
        th = cloud.thetas
        z = rng.standard_normal(cloud.size)
        return self.evolution_mean(cloud.states, th) + np.sqrt(th["tau2"]) * z

    def draw_aux_prior(self, n, rng):
        return None

    # -- parameter learning -----------------------------------------------
    def update_param_suffstats(self, stats, x_prev, x_next, y, aux_prev=None, aux=None):
        """Accumulate one step of sufficient statistics.

        ``syy, syx, sxx`` are weighted by ``1 / k_t``; ``spp`` and ``sxp``
        are ``sum g(x_prev)**2`` and ``sum x * g(x_prev)``.
        """
        if not stats:
            return stats
        gp = self.g(x_prev)
        out = dict(stats)
        out["n"] = stats["n"] + 1.0
        if self.aux_kind:
            k = 1.0 / aux
            out["sxe"] = stats["sxe"] + x_next * x_next
            out["syy"] = stats["syy"] + k * y * y
            out["syx"] = stats["syx"] + k * y * x_next
            out["sxx"] = stats["sxx"] + k * x_next * x_next
        else:
            out["syy"] = stats["syy"] + y * y
            out["syx"] = stats["syx"] + y * x_next
            out["sxx"] = stats["sxx"] + x_next * x_next
        out["spp"] = stats["spp"] + gp * gp
        out["sxp"] = stats["sxp"] + x_next * gp
        return out

    def batch_suffstats(self, x0, x, y, aux=None):
        """Accumulators for a whole trajectory, in one pass per statistic."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        xp = np.concatenate([[x0], x[:-1]])
        gp = self.g(xp)
        acc = np.add.accumulate
        if self.aux_kind:
            k = 1.0 / np.asarray(aux, dtype=np.float64)
            out = {"syy": acc(k * y * y)[-1], "syx": acc(k * y * x)[-1],
                   "sxx": acc(k * x * x)[-1], "sxe": acc(x * x)[-1]}
        else:
            out = {"syy": acc(y * y)[-1], "syx": acc(y * x)[-1], "sxx": acc(x * x)[-1]}
        out["spp"] = acc(gp * gp)[-1]
        out["sxp"] = acc(x * gp)[-1]
        out["n"] = float(len(x))
        return out

    def hyperparameters(self, stats, thetas=None):
        """Conjugate hyperparameters implied by the accumulators.

        Returns a dict with ``a, b`` (sigma2 ~ IG(a, b)), ``c, d``
        (tau2 ~ IG(c, d)) and ``bmean, bprec`` (beta given tau2 is normal
        with mean ``bmean`` and precision ``bprec``, in units of ``1/tau2``
        when tau2 is learned).  Missing accumulators mean "no data".
        """
        th = self.theta if thetas is None else thetas
        a0, b0 = self.prior_sigma2
        c0, d0 = self.prior_tau2
        mb, Bb = self.prior_beta
        n = stats.get("n", 0.0)
        z = 0.0
        syy, syx, sxx = stats.get("syy", z), stats.get("syx", z), stats.get("sxx", z)
        sxe = stats.get("sxe", sxx)
        spp, sxp = stats.get("spp", z), stats.get("sxp", z)
        hp = {"a": a0 + 0.5 * n, "b": b0 + 0.5 * np.maximum(syy - 2.0 * syx + sxx, 0.0),
              "c": c0 + 0.5 * n}
        learn_b = "beta" in self.learn
        learn_t = "tau2" in self.learn
        if learn_b and learn_t:
            prec = 1.0 / Bb + spp
            mean = (mb / Bb + sxp) / prec
            hp["bmean"], hp["bprec"] = mean, prec
            hp["d"] = d0 + 0.5 * np.maximum(sxe + mb * mb / Bb - mean * mean * prec, 0.0)
        elif learn_b:
            t2 = th["tau2"]
            prec = 1.0 / Bb + spp / t2
            hp["bmean"], hp["bprec"] = (mb / Bb + sxp / t2) / prec, prec
            hp["d"] = d0
        else:
            b = th["beta"]
            hp["d"] = d0 + 0.5 * np.maximum(sxe - 2.0 * b * sxp + b * b * spp, 0.0)
            hp["bmean"], hp["bprec"] = mb, 1.0 / Bb
        return hp

    def sample_theta(self, stats, rng, n):
        """Draw learned parameters from ``p(theta | s)``; known ones pass through.

        Draw order is sigma2, tau2, beta.
        """
        out = self.known_thetas()
        if not self.learn:
            return out
        hp = self.hyperparameters(stats)
        if "sigma2" in self.learn:
            out["sigma2"] = draw_invgamma(rng, hp["a"], hp["b"], n)
        if "tau2" in self.learn:
            out["tau2"] = draw_invgamma(rng, hp["c"], hp["d"], n)
        if "beta" in self.learn:
            scale = 1.0 / hp["bprec"]
            if "tau2" in self.learn:
                scale = out["tau2"] * scale
            out["beta"] = hp["bmean"] + np.sqrt(scale) * rng.standard_normal(n)
        return out

    # -- simulation -------------------------------------------------------
    def simulate(self, T, rng):
        """Forward simulation of ``T`` observations."""
        T = int(T)
        th = self.theta
        x0 = self.x0
        if x0 is None:
            x0 = self.m0 + np.sqrt(self.C0) * rng.standard_normal()
        k = self.draw_aux_prior(T, rng) if self.aux_kind else np.ones(T)
        e = rng.standard_normal((T, 2))
        sx, sy = np.sqrt(th["tau2"]), np.sqrt(th["sigma2"])
        x = np.empty(T)
        prev = x0
        for t in range(T):
            prev = th["beta"] * self.g(prev) + sx * e[t, 0]
            x[t] = prev
        y = x + sy * np.sqrt(k) * e[:, 1]
        return SimulatedData(y=y, x=x, aux=k if self.aux_kind else None, x0=float(x0))


class LocalLevel(ScalarModel):
    """Local level model, optionally with an AR(1) coefficient ``beta``.

    Default priors match ``sigma2 ~ IG(5, 4)``, ``tau2 ~ IG(5, 0.4)`` and
    ``x0 ~ N(0, 10)``.
    """

    name = "local_level"
    supports_marginal = True


class HeavyTailed(ScalarModel):
    """Student-t observations and a nonlinear evolution ``g(x) = x/(1+x**2)``.

    Parameters
    ----------
    nu : float
        Degrees of freedom, fixed and known.
    """

    name = "heavy_tailed"
    params = ("sigma2", "tau2", "beta", "nu")
    aux_kind = "continuous"
    nonlinear = True

    def __init__(self, sigma2, tau2, beta=0.9, nu=4.0, **kw):
        if not nu > 0:
            raise ConfigError(f"nu must be positive, got {nu}")
        super().__init__(sigma2, tau2, beta=beta, nu=nu, **kw)

    def g(self, x):
        return x / (1.0 + x * x)

    def _kappa(self, aux):
        return 1.0 if aux is None else aux

    def draw_aux_prior(self, n, rng):
        half = 0.5 * self.theta["nu"]
        return draw_invgamma(rng, half, half, n)

    def propagate_aux(self, cloud, y, rng, marginal=False):
        """Prior draw ``lambda_{t+1} ~ IG(nu/2, nu/2)``, made before resampling."""
        return self.draw_aux_prior(cloud.size, rng)


__all__ = ["LocalLevel", "HeavyTailed", "ScalarModel", "LOG_2PI"]
