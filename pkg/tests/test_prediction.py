import math

import numpy as np
import pytest
from scipy import integrate, stats

from oracles import ode_forecast
from rppkit.errors import DivergentForecastError, HorizonError
from rppkit.likelihood import exposure, log_likelihood
from rppkit.model import EventSequence, ItemParams, ModelConfig, PriorParams, relaxation_integral
from rppkit.prediction import (
    bayes_point,
    bayes_variance,
    forecast_grid,
    mass_gap,
    mle_point,
    posterior,
    predict_bayes,
    predict_mle,
    predict_variance,
)

CFG = ModelConfig(m=30)
SEQ = EventSequence("a", [0.4, 0.9, 1.3, 2.0, 2.2, 3.5, 4.1, 6.0, 7.2, 9.9], 10.0)
P = ItemParams(0.9, 1.2, 0.8)
PRIOR = PriorParams(4.0, 4.0)


def test_mass_gap_matches_cdf_difference():
    T, t = 10.0, 14.0
    want = relaxation_integral(t, P) - relaxation_integral(T, P)
    assert float(mass_gap(T, t, P.mu, P.sigma)) == pytest.approx(want, rel=1e-12)
    # deep in the upper tail the direct difference loses everything; survival keeps it
    gap = float(mass_gap(1e6, 2e6, P.mu, P.sigma))
    d = stats.lognorm(s=P.sigma, scale=math.exp(P.mu))
    assert gap == pytest.approx(d.sf(1e6) - d.sf(2e6), rel=1e-9)
    assert gap > 0


def test_forecast_at_window_end_is_the_count():
    assert predict_mle(SEQ, P, CFG, 10.0).point == SEQ.n
    f = predict_bayes(SEQ, P, None, PRIOR, CFG, 10.0)
    assert f.point == SEQ.n and f.variance == 0.0


def test_saturation():
    Ymax = 1 - relaxation_integral(10.0, P)
    far = predict_mle(SEQ, P, CFG, 1e12).point
    assert far == pytest.approx(SEQ.n + (30 + SEQ.n) * math.expm1(P.fitness * Ymax), rel=1e-12)
    assert far < predict_mle(SEQ, P, CFG, 1e300).point * (1 + 1e-12)


@pytest.mark.parametrize("t", [11.0, 15.0, 40.0])
def test_mle_forecast_solves_the_rate_equation(t):
    want = ode_forecast(SEQ.n, P.fitness, P.mu, P.sigma, 30, 10.0, t)
    assert predict_mle(SEQ, P, CFG, t).point == pytest.approx(want, rel=1e-8)


def test_worked_bayes_example():
    got = float(bayes_point(10, 5.0, 0.1, 2.0, 1.0, 30))
    assert got == pytest.approx(40 * (6 / 5.9) ** 12 - 30, rel=1e-13)
    post = stats.gamma(12, scale=1 / 6)
    mean, _ = integrate.quad(lambda l: 40 * math.exp(0.1 * l) * post.pdf(l), 0, 60,
                             epsabs=0, epsrel=1e-13)
    assert got == pytest.approx(mean - 30, rel=1e-10)
    second, _ = integrate.quad(lambda l: (40 * math.exp(0.1 * l)) ** 2 * post.pdf(l), 0, 60,
                               epsabs=0, epsrel=1e-13)
    var = float(bayes_variance(10, 5.0, 0.1, 2.0, 1.0, 30))
    assert var == pytest.approx(second - mean ** 2, rel=1e-8)


def test_monte_carlo_posterior():
    n, X, Y, a, b, m = 7, 3.0, 0.4, 2.5, 1.5, 20
    rng = np.random.default_rng(5)
    lam = rng.gamma(a + n, 1 / (b + X), size=10 ** 6)
    c = mle_point(n, lam, Y, m)
    se_mean = c.std() / math.sqrt(c.size)
    assert abs(c.mean() - bayes_point(n, X, Y, a, b, m)) < 3 * se_mean
    dev2 = (c - c.mean()) ** 2
    se_var = dev2.std() / math.sqrt(c.size)
    assert abs(c.var() - bayes_variance(n, X, Y, a, b, m)) < 3 * se_var


def test_bayes_tends_to_mle_under_a_sharp_posterior():
    X = exposure(SEQ, P, CFG)
    Y = float(mass_gap(10.0, 20.0, P.mu, P.sigma))
    k = 1e8
    # prior with mean lam0 and vanishing spread
    got = float(bayes_point(SEQ.n, X, Y, k * P.fitness, k, 30))
    assert got == pytest.approx(float(mle_point(SEQ.n, P.fitness, Y, 30)), rel=1e-6)


def test_variance_flags():
    empty = EventSequence("e", [], 0.5)
    theta = ItemParams(1.0, 0.0, 1.0)
    one = ModelConfig(m=1)
    X = exposure(empty, theta, one)
    Y = float(mass_gap(0.5, 100.0, 0.0, 1.0))
    # Y < beta + X <= 2Y: finite mean, divergent variance
    wide = PriorParams(1.0, 0.9)
    assert Y < wide.beta + X <= 2 * Y
    f = predict_bayes(empty, theta, None, wide, one, 100.0)
    assert math.isfinite(f.point)
    assert f.variance is None and f.variance_divergent
    assert f.to_dict()["variance_status"] == "divergent"
    assert predict_variance(empty, theta, None, wide, one, 100.0) == (None, True)
    # beta + X <= Y: the mean itself diverges
    with pytest.raises(DivergentForecastError):
        predict_bayes(empty, theta, None, PriorParams(1.0, 0.3), one, 100.0)
    assert np.isinf(bayes_point(0, 0.0, 1.0, 1.0, 0.5, 5))
    assert np.isnan(bayes_variance(0, 0.0, 1.0, 1.0, 0.5, 5))


def test_precomputed_terms_give_the_same_forecast():
    terms = log_likelihood(SEQ, P, CFG)
    a = predict_bayes(SEQ, P, terms, PRIOR, CFG, 13.0)
    b = predict_bayes(SEQ, P, None, PRIOR, CFG, 13.0)
    assert a == b


def test_horizon_before_window_end():
    with pytest.raises(HorizonError):
        predict_mle(SEQ, P, CFG, 9.0)
    with pytest.raises(HorizonError):
        predict_bayes(SEQ, P, None, PRIOR, CFG, 9.0)
    with pytest.raises(HorizonError):
        forecast_grid([1], [1.0], [1.0], [0.0], [1.0], [5.0], [4.0], 30, None)


def test_posterior_parameters():
    assert posterior(EventSequence("e", [], 10.0), P, PRIOR, CFG) == pytest.approx(
        (4.0, 4.0 + 30 * relaxation_integral(10.0, P)))
    shape, rate = posterior(SEQ, P, PRIOR, CFG)
    assert shape == 4.0 + SEQ.n
    assert rate == pytest.approx(4.0 + exposure(SEQ, P, CFG), rel=1e-15)


def test_posterior_matches_likelihood_times_prior():
    # density ratio of the gamma posterior equals likelihood ratio times prior ratio
    shape, rate = posterior(SEQ, P, PRIOR, CFG)
    post = stats.gamma(shape, scale=1 / rate)
    prior = stats.gamma(PRIOR.alpha, scale=1 / PRIOR.beta)
    l1, l2 = 0.6, 1.4
    ll1 = log_likelihood(SEQ, P.with_fitness(l1), CFG).log_lik
    ll2 = log_likelihood(SEQ, P.with_fitness(l2), CFG).log_lik
    lhs = post.logpdf(l1) - post.logpdf(l2)
    rhs = ll1 - ll2 + prior.logpdf(l1) - prior.logpdf(l2)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_forecast_grid_agrees_with_scalar_paths():
    seqs = [SEQ, EventSequence("b", [1.0, 1.5], 8.0)]
    params = [P, ItemParams(0.5, 0.7, 1.1)]
    X = [exposure(s, p, CFG) for s, p in zip(seqs, params)]
    hs = np.array([[10.0, 12.0, 20.0], [8.0, 12.0, 20.0]])
    mle, mean, var = forecast_grid([s.n for s in seqs], X, [p.fitness for p in params],
                                   [p.mu for p in params], [p.sigma for p in params],
                                   [s.window_end for s in seqs], hs, 30, PRIOR)
    for i, (s, p) in enumerate(zip(seqs, params)):
        for j, t in enumerate(hs[i]):
            assert mle[i, j] == pytest.approx(predict_mle(s, p, CFG, t).point, rel=1e-14)
            f = predict_bayes(s, p, None, PRIOR, CFG, t)
            assert mean[i, j] == pytest.approx(f.point, rel=1e-14)
            assert var[i, j] == pytest.approx(f.variance, rel=1e-12, abs=1e-300)
    assert forecast_grid([1], [1.0], [1.0], [0.0], [1.0], [5.0], [6.0], 30, None)[1] is None
