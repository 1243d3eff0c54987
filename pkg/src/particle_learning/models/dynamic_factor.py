"""Markov-switching dynamic factor model.

::

    y_t     = (1, beta_{l_t})' x_t + sqrt(sigma2) * e_t,   e_t ~ N(0, I_2)
    x_{t+1} = x_t + sqrt(tau2) * w_t
    P(l_{t+1} = 1 | l_t = 1) = p,  P(l_{t+1} = 2 | l_t = 2) = q

Priors: ``beta_i | sigma2 ~ N(b_i0, sigma2 * B_i0)``,
``sigma2 ~ IG(nu00/2, d00/2)``, ``tau2 ~ IG(nu10/2, d10/2)``,
``p ~ Beta(p1, p2)``, ``q ~ Beta(q1, q2)``.

The bivariate Gaussian algebra is done in closed form: with
``b = (1, beta)``, ``R = C + tau2`` and ``S = sigma2 + R * |b|**2`` the
predictive covariance ``R b b' + sigma2 I`` has determinant ``sigma2 * S``
and inverse ``(I - R b b' / S) / sigma2``.
"""
from __future__ import annotations

import numpy as np

from ..core import ParticleCloud
from ..errors import ConfigError, SingularInnovation
from .base import SimulatedData, StateSpaceModel
from .distributions import LOG_2PI, draw_invgamma


def _pos(v, name, k=2):
    v = tuple(float(x) for x in v)
    if len(v) != k or not all(x > 0 for x in v):
        raise ConfigError(f"{name} must be {k} positive numbers, got {v}")
    return v


class DynamicFactor(StateSpaceModel):
    name = "dynamic_factor"
    params = ("beta1", "beta2", "sigma2", "tau2", "p", "q")
    learnable = params
    positive = ("sigma2", "tau2")
    unit = ("p", "q")
    obs_dim = 2
    aux_kind = "discrete"
    supports_marginal = True

    def __init__(self, beta1, beta2, sigma2, tau2, p, q, learn=(),
                 prior_beta1=(0.0, 1.0), prior_beta2=(0.0, 1.0), prior_sigma2=(2.0, 2.0),
                 prior_tau2=(2.0, 2.0), prior_p=(1.0, 1.0), prior_q=(1.0, 1.0),
                 m0=0.0, C0=1.0, x0=None, lambda0=1):
        theta = dict(beta1=beta1, beta2=beta2, sigma2=sigma2, tau2=tau2, p=p, q=q)
        super().__init__(theta, learn=learn, m0=m0, C0=C0, x0=x0)
        self.prior_beta = (
            (float(prior_beta1[0]), _pos(prior_beta1[1:], "prior_beta1 variance", 1)[0]),
            (float(prior_beta2[0]), _pos(prior_beta2[1:], "prior_beta2 variance", 1)[0]),
        )
        self.prior_sigma2 = _pos(prior_sigma2, "prior_sigma2 (nu00, d00)")
        self.prior_tau2 = _pos(prior_tau2, "prior_tau2 (nu10, d10)")
        self.prior_p = _pos(prior_p, "prior_p")
        self.prior_q = _pos(prior_q, "prior_q")
        if lambda0 not in (1, 2):
            raise ConfigError(f"lambda0 must be 1 or 2, got {lambda0}")
        self.lambda0 = int(lambda0)

    # -- structure --------------------------------------------------------
    def evolution_mean(self, x, thetas):
        return x

    def evolution_coefficients(self, thetas):
        return 1.0, thetas["tau2"]

    @staticmethod
    def _loading(thetas, lam):
        return np.where(lam == 1, thetas["beta1"], thetas["beta2"])

    @staticmethod
    def _stay(thetas, lam):
        """``P(l_{t+1} = l_t | l_t)``."""
        return np.where(lam == 1, thetas["p"], thetas["q"])

    @staticmethod
    def _gauss2(y, mean_x, b, R, s2):
        """log N2(y; b mean_x, R b b' + s2 I) and the pieces of the Kalman update."""
        if np.any(np.asarray(s2) <= 0):
            raise SingularInnovation("sigma2 must be positive for the bivariate predictive")
        e1 = y[0] - mean_x
        e2 = y[1] - b * mean_x
        S = s2 + R * (1.0 + b * b)
        be = e1 + b * e2
        quad = (e1 * e1 + e2 * e2 - R * be * be / S) / s2
        return -LOG_2PI - 0.5 * (np.log(s2) + np.log(S)) - 0.5 * quad, be, S

    def _moments(self, cloud, marginal):
        if marginal:
            return cloud.state_stats["m"], cloud.state_stats["C"]
        return cloud.states, 0.0

    def _regime_logliks(self, cloud, y, marginal):
        th = cloud.thetas
        m, C = self._moments(cloud, marginal)
        R = C + th["tau2"]
        out = []
        for lam in (1, 2):
            b = th["beta1"] if lam == 1 else th["beta2"]
            ll, _, _ = self._gauss2(y, m, b, R, th["sigma2"])
            out.append(ll)
        stay = self._stay(th, cloud.aux)
        p1 = np.where(cloud.aux == 1, stay, 1.0 - stay)
        with np.errstate(divide="ignore"):
            return out[0] + np.log(p1), out[1] + np.log1p(-p1)

    # -- initialization ---------------------------------------------------
    def empty_stats(self, n):
        if not self.learn:
            return {}
        keys = ("sxx1", "sxy1", "syy1", "sxx2", "sxy2", "syy2", "sr1", "sdx",
                "n11", "n12", "n21", "n22")
        stats = {k: np.zeros(n) for k in keys}
        stats["n"] = np.float64(0.0)
        return stats

    def initial_cloud(self, n, rng, marginal=False):
        stats = self.empty_stats(n)
        thetas = self.sample_theta(stats, rng, n)
        x = self.m0 + np.sqrt(self.C0) * rng.standard_normal(n)
        state_stats = None
        if marginal:
            state_stats = {"m": np.full(n, self.m0), "C": np.full(n, self.C0)}
        return ParticleCloud(states=x, aux=np.full(n, self.lambda0, dtype=np.int64),
                             param_stats=stats, state_stats=state_stats, thetas=thetas)

    # -- densities --------------------------------------------------------
    def predictive_logdensity(self, cloud, y, marginal=False):
        """Regime mixture ``sum_l N2(y; b_l m, (C + tau2) b_l b_l' + sigma2 I) Pi[l_t, l]``."""
        l1, l2 = self._regime_logliks(cloud, y, marginal)
        return np.logaddexp(l1, l2)

    def propagate_aux(self, cloud, y, rng, marginal=False):
        """Posterior regime draw given ``y_{t+1}``."""
        l1, l2 = self._regime_logliks(cloud, y, marginal)
        with np.errstate(over="ignore"):
            p2 = 1.0 / (1.0 + np.exp(l1 - l2))
        return np.where(rng.random(cloud.size) < p2, 2, 1).astype(np.int64)

    def _kalman(self, m, C, lam, y, th):
        b = self._loading(th, lam)
        R = C + th["tau2"]
        _, be, S = self._gauss2(y, m, b, R, th["sigma2"])
        return m + R * be / S, R * th["sigma2"] / S

    def update_state_suffstats(self, cloud, y):
        """Kalman map for the regime stored in ``cloud.aux``."""
        m, C = cloud.state_stats["m"], cloud.state_stats["C"]
        m1, C1 = self._kalman(m, C, cloud.aux, y, cloud.thetas)
        return {"m": m1, "C": C1}

    def propagate_state(self, cloud, y, rng, marginal=False):
        """Draw ``x_{t+1}`` given the already propagated regime in ``cloud.aux``.

        In marginal mode ``x_t`` is drawn backward from
        ``N((1 - D) m_t + D x_{t+1}, D tau2)`` with ``D = C_t / (C_t + tau2)``.
        """
        th = cloud.thetas
        n = cloud.size
        m, C = self._moments(cloud, marginal)
        m1, C1 = self._kalman(m, C, cloud.aux, y, th)
        if marginal:
            z = rng.standard_normal((2, n))
            x_next = m1 + np.sqrt(C1) * z[0]
            R = C + th["tau2"]
            D = np.divide(C, R, out=np.zeros(np.broadcast(C, R).shape), where=R > 0)
            x_prev = (1.0 - D) * m + D * x_next + np.sqrt(D * th["tau2"]) * z[1]
            return x_prev, x_next, {"m": m1, "C": C1}
        z = rng.standard_normal(n)
        return cloud.states, m1 + np.sqrt(C1) * z, None

    def obs_logdensity(self, x, y, thetas, aux=None):
        b = self._loading(thetas, aux)
        s2 = thetas["sigma2"]
        e1, e2 = y[0] - x, y[1] - b * x
        return -LOG_2PI - np.log(s2) - 0.5 * (e1 * e1 + e2 * e2) / s2

    def transition_logdensity(self, x_next, x, thetas, aux=None):
        d = x_next - x
        t2 = thetas["tau2"]
        return -0.5 * (LOG_2PI + np.log(t2) + d * d / t2)

    def posterior_logdensity(self, x_next, x, y, thetas, aux=None):
        self._unsupported("the regime-marginal proposal density has no closed form here")

    def guess_logdensity(self, cloud, y, guess="mean"):
        """``log sum_l Pi[l_t, l] N2(y; b_l x_t, sigma2 I)``."""
        if guess == "constant":
            return np.zeros(cloud.size)
        th = cloud.thetas
        stay = self._stay(th, cloud.aux)
        p1 = np.where(cloud.aux == 1, stay, 1.0 - stay)
        with np.errstate(divide="ignore"):
            l1 = self.obs_logdensity(cloud.states, y, th, 1) + np.log(p1)
            l2 = self.obs_logdensity(cloud.states, y, th, 2) + np.log1p(-p1)
        return np.logaddexp(l1, l2)

    def draw_regimes(self, lam, thetas, rng):
        stay = self._stay(thetas, lam)
        switch = rng.random(lam.shape[0]) >= stay
        return np.where(switch, 3 - lam, lam).astype(np.int64)

    def draw_aux_transition(self, cloud, rng):
        return self.draw_regimes(cloud.aux, cloud.thetas, rng)

    def sample_state_transition(self, cloud, rng):
        return cloud.states + np.sqrt(cloud.thetas["tau2"]) * rng.standard_normal(cloud.size)

    # -- parameter learning -----------------------------------------------
    def update_param_suffstats(self, stats, x_prev, x_next, y, aux_prev=None, aux=None):
        """Regime-gated regression sums, squared state increments, transition counts."""
        if not stats:
            return stats
        out = dict(stats)
        out["n"] = stats["n"] + 1.0
        y1, y2 = y[0], y[1]
        for i in (1, 2):
            gate = (aux == i).astype(np.float64)
            out[f"sxx{i}"] = stats[f"sxx{i}"] + gate * x_next * x_next
            out[f"sxy{i}"] = stats[f"sxy{i}"] + gate * x_next * y2
            out[f"syy{i}"] = stats[f"syy{i}"] + gate * y2 * y2
        r1 = y1 - x_next
        out["sr1"] = stats["sr1"] + r1 * r1
        dx = x_next - x_prev
        out["sdx"] = stats["sdx"] + dx * dx
        for i in (1, 2):
            for j in (1, 2):
                key = f"n{i}{j}"
                out[key] = stats[key] + ((aux_prev == i) & (aux == j))
        return out

    def hyperparameters(self, stats, thetas=None):
        """Conjugate hyperparameters.

        ``sigma2 ~ IG(nu0/2, d0/2)`` where each step adds two residuals;
        when the loadings are learned ``d0`` is the normal-inverse-gamma
        marginal update, otherwise the residuals use the fixed loadings.
        """
        th = self.theta if thetas is None else thetas
        z = 0.0
        n = stats.get("n", 0.0)
        nu00, d00 = self.prior_sigma2
        nu10, d10 = self.prior_tau2
        hp = {"nu0": nu00 + 2.0 * n, "nu1": nu10 + n, "d1": d10 + stats.get("sdx", z)}
        d0 = d00 + stats.get("sr1", z)
        for i in (1, 2):
            b0, B0 = self.prior_beta[i - 1]
            sxx, sxy, syy = (stats.get(f"{k}{i}", z) for k in ("sxx", "sxy", "syy"))
            Binv = 1.0 / B0 + sxx
            b = (b0 / B0 + sxy) / Binv
            hp[f"Binv{i}"], hp[f"b{i}"] = Binv, b
            if f"beta{i}" in self.learn:
                d0 = d0 + np.maximum(syy + b0 * b0 / B0 - b * b * Binv, 0.0)
            else:
                bi = th[f"beta{i}"]
                d0 = d0 + np.maximum(syy - 2.0 * bi * sxy + bi * bi * sxx, 0.0)
        hp["d0"] = d0
        p1, p2 = self.prior_p
        q1, q2 = self.prior_q
        hp["p1"] = p1 + stats.get("n11", z)
        hp["p2"] = p2 + stats.get("n12", z)
        hp["q1"] = q1 + stats.get("n22", z)
        hp["q2"] = q2 + stats.get("n21", z)
        return hp

    def sample_theta(self, stats, rng, n):
        """Draw order: sigma2, beta1, beta2, tau2, p, q."""
        out = self.known_thetas()
        if not self.learn:
            return out
        hp = self.hyperparameters(stats)
        L = self.learn
        if "sigma2" in L:
            out["sigma2"] = draw_invgamma(rng, 0.5 * hp["nu0"], 0.5 * hp["d0"], n)
        s2 = out["sigma2"]
        for i in (1, 2):
            if f"beta{i}" in L:
                out[f"beta{i}"] = hp[f"b{i}"] + np.sqrt(s2 / hp[f"Binv{i}"]) * rng.standard_normal(n)
        if "tau2" in L:
            out["tau2"] = draw_invgamma(rng, 0.5 * hp["nu1"], 0.5 * hp["d1"], n)
        if "p" in L:
            out["p"] = rng.beta(hp["p1"], hp["p2"], n)
        if "q" in L:
            out["q"] = rng.beta(hp["q1"], hp["q2"], n)
        return out

    # -- simulation -------------------------------------------------------
    def simulate(self, T, rng):
        T = int(T)
        th = self.theta
        x0 = self.x0
        if x0 is None:
            x0 = self.m0 + np.sqrt(self.C0) * rng.standard_normal()
        u = rng.random(T)
        e = rng.standard_normal((T, 3))
        lam = np.empty(T, dtype=np.int64)
        x = np.empty(T)
        prev_l, prev_x = self.lambda0, x0
        for t in range(T):
            stay = th["p"] if prev_l == 1 else th["q"]
            prev_l = prev_l if u[t] < stay else 3 - prev_l
            prev_x = prev_x + np.sqrt(th["tau2"]) * e[t, 0]
            lam[t], x[t] = prev_l, prev_x
        b = np.where(lam == 1, th["beta1"], th["beta2"])
        s = np.sqrt(th["sigma2"])
        y = np.column_stack([x + s * e[:, 1], b * x + s * e[:, 2]])
        return SimulatedData(y=y, x=x, aux=lam, x0=float(x0))
