import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from particle_learning import DynamicFactor, HeavyTailed, LocalLevel, ParticleCloud, build_model
from particle_learning.errors import ConfigError, UnsupportedConditioningSet
from particle_learning.models.distributions import draw_invgamma
from particle_learning.rng import stream

HALF_LOG_2PI = -0.91893853320467274  # -log(2 pi)/2, 17 digits


def cloud(model, n, x=0.0, aux=None, **theta):
    th = dict(model.theta, **theta)
    return ParticleCloud(states=np.full(n, float(x)), thetas=th,
                         aux=None if aux is None else np.full(n, aux))


# -- predictive ---------------------------------------------------------------

def test_predictive_standard_normal_cases():
    ll = LocalLevel(sigma2=0.5, tau2=0.5)
    assert ll.predictive_logdensity(ll.particle(0.0), 0.0)[0] == pytest.approx(HALF_LOG_2PI, abs=1e-15)
    rb = ll.predictive_logdensity(ll.particle(m=0.0, C=0.0), 0.0, marginal=True)[0]
    assert rb == pytest.approx(HALF_LOG_2PI, abs=1e-15)
    ht = HeavyTailed(sigma2=0.5, tau2=0.5)
    assert ht.predictive_logdensity(ht.particle(0.0, aux=1.0), 0.0)[0] == pytest.approx(
        HALF_LOG_2PI, abs=1e-15)


def test_dynamic_factor_degenerate_predictive():
    m = DynamicFactor(beta1=0.3, beta2=-1.7, sigma2=0.8, tau2=0.0, p=0.6, q=0.9)
    y = np.array([0.4, -0.2])
    ref = (stats.norm.logpdf(y[0], 1.1, np.sqrt(0.8))
           + stats.norm.logpdf(y[1], 0.3 * 1.1, np.sqrt(0.8)))
    ref2 = (stats.norm.logpdf(y[0], 1.1, np.sqrt(0.8))
            + stats.norm.logpdf(y[1], -1.7 * 1.1, np.sqrt(0.8)))
    for aux in (1, 2):
        c = m.particle(m=1.1, C=0.0, aux=aux)
        stay = 0.6 if aux == 1 else 0.9
        p1 = stay if aux == 1 else 1 - stay
        got = m.predictive_logdensity(c, y, marginal=True)[0]
        assert got == pytest.approx(np.logaddexp(ref + np.log(p1), ref2 + np.log1p(-p1)), abs=1e-12)
    # equal loadings: the regime mixture collapses to the product of two normals
    m2 = DynamicFactor(beta1=0.3, beta2=0.3, sigma2=0.8, tau2=0.0, p=0.6, q=0.9)
    got = m2.predictive_logdensity(m2.particle(m=1.1, C=0.0, aux=1), y, marginal=True)[0]
    assert got == pytest.approx(ref, abs=1e-12)


def test_rao_blackwell_quadrature():
    ll = LocalLevel(sigma2=0.7, tau2=0.2)
    m, C, y = 0.3, 0.45, 1.1
    x = np.linspace(m - 12 * np.sqrt(C), m + 12 * np.sqrt(C), 10 ** 6)
    c = ParticleCloud(states=x, thetas=ll.theta)
    f = np.exp(ll.predictive_logdensity(c, y)) * stats.norm.pdf(x, m, np.sqrt(C))
    quad = integrate.trapezoid(f, x)
    closed = np.exp(ll.predictive_logdensity(ll.particle(m=m, C=C), y, marginal=True)[0])
    assert abs(quad - closed) < 1e-6


def test_heavy_tailed_has_no_state_stats():
    ht = HeavyTailed(sigma2=1, tau2=1)
    with pytest.raises(UnsupportedConditioningSet):
        ht.predictive_logdensity(ht.particle(m=0.0, C=1.0, aux=1.0), 0.0, marginal=True)


# -- full adaptation identity ------------------------------------------------

finite = st.floats(-10, 10, allow_nan=False)
variance = st.floats(0.01, 10)


@settings(max_examples=300, deadline=None)
@given(x=finite, xn=finite, y=finite, s2=variance, t2=variance, beta=st.floats(-2, 2))
def test_bayes_decomposition_local_level(x, xn, y, s2, t2, beta):
    m = LocalLevel(sigma2=s2, tau2=t2, beta=beta)
    th = m.theta
    lhs = m.predictive_logdensity(m.particle(x), y)[0] + m.posterior_logdensity(xn, x, y, th)
    rhs = m.obs_logdensity(xn, y, th) + m.transition_logdensity(xn, x, th)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


@settings(max_examples=200, deadline=None)
@given(x=finite, xn=finite, y=finite, s2=variance, t2=variance, lam=st.floats(0.05, 20))
def test_bayes_decomposition_heavy_tailed(x, xn, y, s2, t2, lam):
    m = HeavyTailed(sigma2=s2, tau2=t2)
    th = m.theta
    a = np.array([lam])
    lhs = m.predictive_logdensity(m.particle(x, aux=lam), y)[0] + m.posterior_logdensity(xn, x, y, th, a)
    rhs = m.obs_logdensity(xn, y, th, a) + m.transition_logdensity(xn, x, th)
    assert abs(lhs - rhs)[0] <= 1e-10 * max(1.0, abs(rhs[0]))


# -- auxiliary states ---------------------------------------------------------

def test_equal_loadings_give_prior_regime_row():
    m = DynamicFactor(beta1=0.5, beta2=0.5, sigma2=1, tau2=0.3, p=0.7, q=0.8)
    n = 10 ** 5
    c = ParticleCloud(states=np.zeros(n), aux=np.ones(n, dtype=np.int64), thetas=m.theta)
    lam = m.propagate_aux(c, np.array([1.0, -0.5]), stream(1))
    frac = np.mean(lam == 1)
    assert abs(frac - 0.7) < 4 * np.sqrt(0.7 * 0.3 / n)


def test_absorbing_regime():
    m = DynamicFactor(beta1=0.5, beta2=-2.0, sigma2=1, tau2=0.3, p=1.0, q=0.5)
    c = ParticleCloud(states=np.zeros(1000), aux=np.ones(1000, dtype=np.int64), thetas=m.theta)
    lam = m.propagate_aux(c, np.array([3.0, -6.0]), stream(1))
    assert np.all(lam == 1)


def test_heavy_tailed_scale_mean():
    m = HeavyTailed(sigma2=1, tau2=1, nu=4.0)
    lam = m.propagate_aux(cloud(m, 10 ** 5, aux=1.0), 0.0, stream(2))
    se = lam.std(ddof=1) / np.sqrt(lam.size)
    assert abs(lam.mean() - 2.0) < 4 * se


# -- state propagation --------------------------------------------------------

@pytest.mark.parametrize("model", [LocalLevel(sigma2=0.8, tau2=0.8),
                                   HeavyTailed(sigma2=0.8, tau2=0.8, beta=0.9)])
def test_symmetric_posterior_draw(model):
    n = 10 ** 5
    c = cloud(model, n, 0.0, aux=1.0 if model.aux_kind else None)
    x_prev, x_next, _ = model.propagate_state(c, 2.0, stream(4))
    assert np.array_equal(x_prev, c.states)
    se = np.sqrt(0.4 / n)
    assert abs(x_next.mean() - 1.0) < 4 * se
    assert abs(x_next.var() - 0.4) < 4 * 0.4 * np.sqrt(2.0 / n)


def test_zero_evolution_noise_keeps_state():
    m = LocalLevel(sigma2=1.0, tau2=0.0)
    c = ParticleCloud(states=np.linspace(-1, 1, 7), thetas=m.theta)
    _, x_next, _ = m.propagate_state(c, 5.0, stream(0))
    assert np.array_equal(x_next, c.states)


# -- state sufficient statistics ----------------------------------------------

def test_kalman_map_example():
    m = LocalLevel(sigma2=1.0, tau2=0.1)
    new = m.update_state_suffstats(m.particle(m=0.0, C=0.9), 1.0)
    assert new["m"][0] == pytest.approx(0.5, abs=1e-15)
    assert new["C"][0] == pytest.approx(0.5, abs=1e-15)


def test_kalman_map_limits():
    m = LocalLevel(sigma2=1e300, tau2=0.1)
    new = m.update_state_suffstats(m.particle(m=0.3, C=0.9), 7.0)
    assert new["m"][0] == pytest.approx(0.3, abs=1e-12)
    assert new["C"][0] == pytest.approx(1.0, rel=1e-12)
    m = LocalLevel(sigma2=1.0, tau2=0.0)
    new = m.update_state_suffstats(m.particle(m=0.3, C=0.0), 7.0)
    assert new["m"][0] == 0.3 and new["C"][0] == 0.0


# -- parameter sufficient statistics ----------------------------------------

def _ll_learning(**kw):
    return LocalLevel(sigma2=1, tau2=0.1, learn=("sigma2", "tau2"), prior_sigma2=(5, 4),
                      prior_tau2=(5, 0.4), **kw)


def test_zero_residual_update():
    m = _ll_learning()
    s = m.update_param_suffstats(m.empty_stats(1), np.array([0.0]), np.array([1.3]), 1.3)
    hp = m.hyperparameters(s)
    assert hp["a"] == 5.5 and hp["b"][0] == 4.0


def test_zero_increment_update():
    m = _ll_learning()
    s = m.update_param_suffstats(m.empty_stats(1), np.array([0.7]), np.array([0.7]), -2.0)
    hp = m.hyperparameters(s)
    assert hp["c"] == 5.5 and hp["d"][0] == 0.4


@pytest.mark.parametrize("model", [
    _ll_learning(),
    LocalLevel(sigma2=1, tau2=0.1, beta=0.9, learn=("beta",)),
    LocalLevel(sigma2=1, tau2=0.1, beta=0.9, learn=("sigma2", "tau2", "beta")),
    HeavyTailed(sigma2=1, tau2=0.1, learn=("sigma2", "tau2", "beta")),
])
def test_batch_equals_recursive(model):
    g = stream(12)
    data = model.simulate(60, g)
    s = model.empty_stats(1)
    prev = np.array([data.x0])
    for t in range(60):
        aux_t = None if data.aux is None else np.array([data.aux[t]])
        nxt = np.array([data.x[t]])
        s = model.update_param_suffstats(s, prev, nxt, data.y[t], aux=aux_t)
        prev = nxt
    batch = model.batch_suffstats(data.x0, data.x, data.y, data.aux)
    for k, v in batch.items():
        assert np.asarray(s[k]).reshape(-1)[0] == v, k
    h1, h2 = model.hyperparameters(s), model.hyperparameters(batch)
    for k in h1:
        assert np.asarray(h1[k]).reshape(-1)[0] == np.asarray(h2[k]).reshape(-1)[0], k


def test_suffstats_order_independent():
    m = _ll_learning()
    g = stream(3)
    xp, xn, y = g.normal(size=50), g.normal(size=50), 0.4
    perm = g.permutation(50)
    s = m.update_param_suffstats(m.empty_stats(50), xp, xn, y)
    sp = m.update_param_suffstats(m.empty_stats(50), xp[perm], xn[perm], y)
    for k in ("syy", "syx", "sxx", "spp", "sxp"):
        assert np.array_equal(s[k][perm], sp[k])


def test_dynamic_factor_counts():
    m = DynamicFactor(beta1=0.5, beta2=1.5, sigma2=1, tau2=0.1, p=0.9, q=0.8, learn=("p", "q"))
    s = m.empty_stats(1)
    one = np.array([1])
    s = m.update_param_suffstats(s, np.zeros(1), np.zeros(1), np.zeros(2), aux_prev=one, aux=one)
    assert s["n11"][0] == 1
    assert s["n12"][0] == 0 and s["n21"][0] == 0 and s["n22"][0] == 0
    hp = m.hyperparameters(s)
    assert hp["p1"][0] == 2.0 and hp["q1"][0] == 1.0 and hp["q2"][0] == 1.0


# -- conjugate samplers -------------------------------------------------------

def _check_moments(x, mean, var, k=5.0):
    n = x.size
    assert abs(x.mean() - mean) < k * np.sqrt(var / n)
    return n


def test_invgamma_prior_mean():
    m = _ll_learning()
    th = m.sample_theta(m.empty_stats(10 ** 5), stream(8), 10 ** 5)
    _check_moments(th["sigma2"], 1.0, 1.0 / 3.0, k=4.0)


@pytest.mark.parametrize("a,b", [(10.0, 9.0), (6.0, 0.5)])
def test_invgamma_moments(a, b):
    n = 10 ** 5
    x = draw_invgamma(stream(9), a, b, n)
    d = stats.invgamma(a, scale=b)
    _check_moments(x, d.mean(), d.var())
    raw = [d.moment(k) for k in range(1, 5)]
    mu = raw[0]
    m4 = raw[3] - 4 * mu * raw[2] + 6 * mu ** 2 * raw[1] - 3 * mu ** 4
    assert abs(x.var() - d.var()) < 5 * np.sqrt((m4 - d.var() ** 2) / n)


def test_normal_and_beta_moments():
    m = DynamicFactor(beta1=0.5, beta2=1.5, sigma2=2.0, tau2=0.1, p=0.9, q=0.8,
                      learn=("beta1", "p"), prior_beta1=(0.4, 0.25), prior_p=(3.0, 2.0))
    n = 10 ** 5
    th = m.sample_theta(m.empty_stats(n), stream(10), n)
    _check_moments(th["beta1"], 0.4, 2.0 * 0.25)
    assert abs(th["beta1"].var() - 0.5) < 5 * 0.5 * np.sqrt(2.0 / n)
    bmean, bvar = 3 / 5, 3 * 2 / (25 * 6)
    _check_moments(th["p"], bmean, bvar)


def test_beta_counts_concentrate_at_one():
    # only stay-counts: Beta(1 + k, 1) has mean (k + 1) / (k + 2)
    m = DynamicFactor(beta1=0.5, beta2=1.5, sigma2=1, tau2=0.1, p=0.9, q=0.8, learn=("p",))
    n = 10 ** 5
    for k in (1.0, 10.0, 1000.0):
        s = m.empty_stats(n)
        s["n11"] = np.full(n, k)
        p = m.sample_theta(s, stream(11), n)["p"]
        assert np.all((p > 0) & (p <= 1))
        a, b = k + 1, 1.0
        _check_moments(p, a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1)))
    assert np.quantile(p, 0.01) > 0.995


def test_empty_stats_reproduce_prior_exactly():
    m = _ll_learning()
    th = m.sample_theta(m.empty_stats(100), stream(13), 100)
    g = stream(13)
    assert np.array_equal(th["sigma2"], draw_invgamma(g, 5.0, 4.0, 100))
    assert np.array_equal(th["tau2"], draw_invgamma(g, 5.0, 0.4, 100))


# -- construction -------------------------------------------------------------

def test_model_validation():
    with pytest.raises(ConfigError):
        LocalLevel(sigma2=-1, tau2=1)
    with pytest.raises(ConfigError):
        LocalLevel(sigma2=1, tau2=1, learn=("nu",))
    with pytest.raises(ConfigError):
        DynamicFactor(beta1=0, beta2=0, sigma2=1, tau2=1, p=1.2, q=0.5)
    with pytest.raises(ConfigError):
        build_model("nope")
    with pytest.raises(ConfigError):
        build_model("local_level", sigma2=1)
