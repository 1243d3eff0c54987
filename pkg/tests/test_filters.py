import numpy as np
import pytest
from scipy import stats

from particle_learning import (DynamicFactor, FilterConfig, HeavyTailed, LocalLevel, ParticleCloud,
                               run_filter)
from particle_learning.errors import (AllWeightsDegenerate, ConfigError, InvalidData,
                                      UnsupportedConditioningSet)
from particle_learning.filters import (ALGORITHMS, FilterState, step_apf, step_fabf, step_liu_west,
                                       step_pl, step_storvik)
from particle_learning.oracle import kalman_filter
from particle_learning.rng import stream

LEARN_LL = LocalLevel(sigma2=0.5, tau2=0.1, learn=("sigma2", "tau2"))
HEAVY = HeavyTailed(sigma2=0.5, tau2=0.2, beta=0.9, learn=("sigma2", "tau2", "beta"))
DFM = DynamicFactor(beta1=0.5, beta2=1.5, sigma2=0.5, tau2=0.1, p=0.9, q=0.8,
                    learn=("beta1", "beta2", "sigma2", "tau2", "p", "q"))


def _cases():
    for model in (LEARN_LL, HEAVY, DFM):
        for alg in ALGORITHMS:
            if alg == "PL_SUFF" and not model.supports_marginal:
                continue
            yield pytest.param(model, alg, id=f"{model.name}-{alg}")


@pytest.mark.parametrize("model,alg", list(_cases()))
def test_every_algorithm_runs_and_replays(model, alg):
    data = model.simulate(25, stream(1))
    cfg = FilterConfig(alg, 200)
    r1 = run_filter(model, data, cfg, seed=3)
    r2 = run_filter(model, data, cfg, seed=3)
    assert r1.same_results(r2)
    assert r1.T == 25 and np.all(np.isfinite(r1.logpred))
    assert np.array_equal(r1.logml, np.cumsum(r1.logpred))
    assert set(r1.targets) == {"state", *model.learn}
    for s in r1.summaries.values():
        assert s.shape == (25, 9)
        assert np.all(np.diff(s[:, 2:], axis=1) >= 0)
    if model.aux_kind == "discrete":
        assert np.all((r1.regime_prob >= 0) & (r1.regime_prob <= 1))
    r3 = run_filter(model, data, cfg, seed=3, replication=1)
    assert not r1.same_results(r3)


def test_weights_uniform_and_lengths_after_each_step():
    cfg = FilterConfig("PL", 50)
    for model in (LEARN_LL, HEAVY, DFM):
        data = model.simulate(5, stream(2))
        state = FilterState(model.initial_cloud(50, stream(3)))
        for t in range(5):
            state = step_pl(model, state, data.y[t], stream(4, 0, t), cfg)
            c = state.cloud
            assert np.allclose(c.weights, 1 / 50)
            c.validate()
            for v in c.thetas.values():
                assert np.ndim(v) == 0 or len(v) == 50


@pytest.mark.parametrize("kw", [dict(n_particles=1), dict(algorithm="XX"), dict(lw_delta=1.0),
                                dict(resampler="stratified"), dict(apf_guess="median"),
                                dict(storvik_proposal="exact"), dict(n_particles=2.5)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        FilterConfig(**kw)


@pytest.mark.parametrize("bad", [[], np.array([1.0, np.nan]), [[1.0, 2.0]], "abc"])
def test_invalid_data(bad):
    with pytest.raises(InvalidData):
        run_filter(LEARN_LL, bad, FilterConfig(), seed=0)


def test_unsupported_conditioning_sets():
    with pytest.raises(UnsupportedConditioningSet):
        run_filter(HEAVY, [0.0, 1.0], FilterConfig("PL_SUFF", 10), seed=0)
    y = DFM.simulate(3, stream(0)).y
    with pytest.raises(UnsupportedConditioningSet):
        run_filter(DFM, y, FilterConfig("STORVIK", 10, storvik_proposal="adapted"), seed=0)


@pytest.mark.parametrize("alg", ["BF", "PL", "FABF"])
def test_degenerate_weights_raise(alg):
    m = LocalLevel(sigma2=1e-3, tau2=1e-3)
    with np.errstate(all="ignore"), pytest.raises(AllWeightsDegenerate):
        run_filter(m, [1e200], FilterConfig(alg, 10), seed=0)


def test_zero_evolution_noise_keeps_resampled_states():
    m = LocalLevel(sigma2=1.0, tau2=0.0)
    x = np.linspace(-2, 2, 9)
    state = FilterState(ParticleCloud(states=x, thetas=m.theta))
    for cfg in (FilterConfig("PL", 9), FilterConfig("PL", 9, resampler="systematic")):
        out = step_pl(m, state, 0.3, stream(5), cfg)
        assert set(out.cloud.states) <= set(x)
    # the weights are the likelihood of y at x_t
    lm = step_pl(m, state, 0.3, stream(5), FilterConfig("PL", 9)).logpred[0]
    expect = np.log(np.mean(stats.norm.pdf(0.3, x, 1.0)))
    assert lm == pytest.approx(expect, abs=1e-12)


def test_single_exact_bayes_step():
    m = LocalLevel(sigma2=0.6, tau2=0.4, m0=0.5, C0=0.0)
    r = run_filter(m, [1.7], FilterConfig("PL", 4000), seed=2, store_history=True)
    post_mean = 0.5 + 0.4 / 1.0 * (1.7 - 0.5)
    post_var = 0.4 * 0.6 / 1.0
    p = stats.kstest(r.history.states[0], "norm", args=(post_mean, np.sqrt(post_var))).pvalue
    assert p > 0.001


def test_identical_particles_fabf_and_pl_same_law():
    m = LocalLevel(sigma2=0.6, tau2=0.4)
    n = 4000
    state = FilterState(ParticleCloud(states=np.full(n, 0.2), thetas=m.theta))
    mu, var = 0.2 + 0.4 * (1.1 - 0.2), 0.24
    for step in (step_pl, step_fabf):
        out = step(m, state, 1.1, stream(6), FilterConfig("PL", n))
        assert stats.kstest(out.cloud.states, "norm", args=(mu, np.sqrt(var))).pvalue > 0.001


def test_pl_weights_less_variable_than_bootstrap():
    m = LocalLevel(sigma2=0.3, tau2=0.5)
    g = stream(7)
    wins = 0
    reps = 200
    for _ in range(reps):
        x = g.normal(size=500)
        y = 1.5
        c = ParticleCloud(states=x, thetas=m.theta)
        pl_w = np.exp(m.predictive_logdensity(c, y))
        x1 = x + np.sqrt(0.5) * g.standard_normal(500)
        bf_w = np.exp(m.obs_logdensity(x1, y, m.theta))
        wins += np.var(pl_w / pl_w.sum()) < np.var(bf_w / bf_w.sum())
    assert stats.binomtest(int(wins), reps, 0.5, alternative="greater").pvalue < 0.001


def test_storvik_adapted_matches_pl():
    m = LocalLevel(sigma2=1.0, tau2=0.5, C0=1.0)
    y = m.simulate(10, stream(8)).y
    sub = []
    for alg, kw in (("PL", {}), ("STORVIK", dict(storvik_proposal="adapted"))):
        r = run_filter(m, y, FilterConfig(alg, 5000, **kw), seed=9)
        sub.append(stream(10).choice(r.final_cloud.states, 300, replace=False))
    assert stats.ks_2samp(*sub).pvalue > 0.001


def test_apf_constant_guess_is_uniform_first_stage():
    m = LocalLevel(sigma2=1.0, tau2=0.5)
    c = ParticleCloud(states=stream(0).normal(size=10), thetas=m.theta)
    assert np.array_equal(m.guess_logdensity(c, 3.0, "constant"), np.zeros(10))
    r = run_filter(m, [0.1, 0.2], FilterConfig("APF", 50, apf_guess="constant"), seed=1)
    assert np.all(np.isfinite(r.logpred))


def test_apf_perfect_adaptation_second_stage_uniform():
    # zero evolution noise: p(y | x_{t+1}) equals p(y | g(x_t)), second stage weights 1
    m = LocalLevel(sigma2=1.0, tau2=0.0)
    x = np.linspace(-1, 1, 20)
    state = FilterState(ParticleCloud(states=x, thetas=m.theta))
    out = step_apf(m, state, 0.4, stream(3), FilterConfig("APF", 20))
    lm1 = np.log(np.mean(stats.norm.pdf(0.4, x, 1.0)))
    assert out.logpred[0] == pytest.approx(lm1, abs=1e-12)


def test_storvik_prior_weights_are_likelihoods():
    m = LocalLevel(sigma2=1.0, tau2=0.5)
    x = np.linspace(-1, 1, 20)
    state = FilterState(ParticleCloud(states=x, thetas=m.theta))
    out = step_storvik(m, state, 0.4, stream(3), FilterConfig("STORVIK", 20))
    g = stream(3)
    x1 = x + np.sqrt(0.5) * g.standard_normal(20)
    assert out.logpred[0] == pytest.approx(np.log(np.mean(stats.norm.pdf(0.4, x1, 1.0))), abs=1e-12)


def test_liu_west_constants():
    cfg = FilterConfig("LW", lw_delta=0.95)
    assert cfg.lw_a == pytest.approx(0.97368421052631579, abs=1e-15)
    assert cfg.lw_h2 == pytest.approx(0.05193905817174516, abs=1e-15)


def test_liu_west_unit_shrinkage_freezes_atoms():
    m = LocalLevel(sigma2=1.0, tau2=0.1, beta=0.9, learn=("beta",))
    c0 = m.initial_cloud(100, stream(4))
    state = FilterState(c0)
    cfg = FilterConfig("LW", 100)
    for t in range(5):
        state = step_liu_west(m, state, 0.3 * t, stream(5, 0, t), cfg, a=1.0)
    assert set(state.cloud.thetas["beta"]) <= set(c0.thetas["beta"])


def test_bootstrap_error_halves_with_four_times_particles():
    m = LocalLevel(sigma2=0.13, tau2=0.013, C0=10.0)
    err = {1000: [], 4000: []}
    for seed in range(8):
        data = m.simulate(100, stream(seed))
        kf = kalman_filter(data.y, 0.13, 0.013, m0=0.0, C0=10.0)
        for n in err:
            r = run_filter(m, data, FilterConfig("BF", n), seed=seed)
            err[n].append(np.mean((r.mean() - kf.m) ** 2))
    ratio = np.sqrt(np.mean(err[1000]) / np.mean(err[4000]))
    assert 1.5 < ratio < 2.7


def test_history_storage():
    y = LEARN_LL.simulate(6, stream(0)).y
    r = run_filter(LEARN_LL, y, FilterConfig("PL", 40), seed=0, store_history=True)
    h = r.history
    assert h.states.shape == (6, 40) and set(h.thetas) == {"sigma2", "tau2"}
    assert np.array_equal(h.states[-1], r.final_cloud.states)
    assert run_filter(LEARN_LL, y, FilterConfig("PL", 40), seed=0).history is None
