import math

import numpy as np
import pytest
from scipy import special

from oracles import central_difference, direct_log_likelihood
from rppkit.errors import DegenerateExposureError, InvalidParameterError
from rppkit.likelihood import (
    corpus_marginal_log_likelihood,
    exposure,
    grad_mu_sigma,
    latent_fitness,
    log_likelihood,
    marginal_log_likelihood,
    mle_fitness,
    prior_gradients,
)
from rppkit.model import EventSequence, ItemParams, ModelConfig, PackedCorpus, PriorParams
from rppkit.model import relaxation_integral

CFG = ModelConfig(m=30)


def test_empty_sequence_log_likelihood():
    p = ItemParams(0.7, 1.0, 0.8)
    seq = EventSequence("e", [], 7.0)
    want = -0.7 * 30 * relaxation_integral(7.0, p)
    assert log_likelihood(seq, p, CFG).log_lik == pytest.approx(want, rel=1e-14)


def test_small_worked_case_against_term_by_term_oracle():
    cfg = ModelConfig(m=2)
    seq = EventSequence("x", [1.0, 2.0], 5.0)
    p = ItemParams(1.0, 0.0, 1.0)
    got = log_likelihood(seq, p, cfg).log_lik
    assert got < 0 and math.isfinite(got)
    assert got == pytest.approx(direct_log_likelihood([1.0, 2.0], 5.0, 1.0, 0.0, 1.0, 2), rel=1e-13)


def test_zero_fitness_with_events_is_minus_infinity():
    seq = EventSequence("x", [1.0], 5.0)
    assert log_likelihood(seq, ItemParams(0.0, 0.0, 1.0), CFG).log_lik == -math.inf


def test_exposure_matches_definition():
    seq = EventSequence("x", [0.5, 1.5, 4.0], 9.0)
    p = ItemParams(1.0, 1.0, 0.9)
    F = relaxation_integral(np.array([0.5, 1.5, 4.0]), p)
    want = (30 + 3) * relaxation_integral(9.0, p) - F.sum()
    assert exposure(seq, p, CFG) == pytest.approx(want, rel=1e-13)


def test_exposure_precision_when_relaxation_is_complete():
    # F(T) ~ 1 and every F(t_i) ~ 1: X is the sum of small survival gaps
    seq = EventSequence("x", [200.0, 300.0], 400.0)
    p = ItemParams(1.0, 0.0, 0.5)
    sf = lambda t: special.ndtr(-(math.log(t)) / 0.5)  # noqa: E731
    want = 32 * sf(400.0) * 0 + 30 * (1 - sf(400.0)) + (sf(200.0) - sf(400.0)) + (sf(300.0) - sf(400.0))
    assert exposure(seq, p, CFG) == pytest.approx(want, rel=1e-12)


def test_mle_fitness_closed_form_and_maximum():
    seq = EventSequence("x", [1.0, 2.0, 4.0], 10.0)
    p = ItemParams(1.0, 1.0, 1.0)
    lam = mle_fitness(seq, p, CFG)
    assert lam == 3 / exposure(seq, p, CFG)
    best = log_likelihood(seq, p.with_fitness(lam), CFG).log_lik
    for f in (0.99, 1.01):
        assert log_likelihood(seq, p.with_fitness(lam * f), CFG).log_lik < best


def test_mle_fitness_golden_section_oracle():
    from scipy.optimize import minimize_scalar
    seq = EventSequence("x", [1.0, 2.0, 4.0], 10.0)
    p = ItemParams(1.0, 1.0, 1.0)
    lam = mle_fitness(seq, p, CFG)
    res = minimize_scalar(lambda x: -direct_log_likelihood([1.0, 2.0, 4.0], 10.0, x, 1.0, 1.0, 30),
                          bracket=(0.01, 0.05, 1.0), method="golden", tol=1e-12)
    assert lam == pytest.approx(res.x, rel=1e-6)


def test_single_event_fitness():
    t, T = 1.5, 50.0
    p = ItemParams(1.0, 0.5, 0.8)
    FT, Ft = relaxation_integral(T, p), relaxation_integral(t, p)
    # n = 1 in n / ((m + n) F(T) - sum F(t_i)); the F(t) term carries no factor m
    want = 1 / ((31 - Ft / FT) * FT)
    assert mle_fitness(EventSequence("x", [t], T), p, CFG) == pytest.approx(want, rel=1e-13)


def test_mle_fitness_edge_cases():
    assert mle_fitness(EventSequence("e", [], 3.0), ItemParams(1, 0, 1), CFG) == 0.0
    # all relaxation mass beyond reach: exposure underflows to zero
    seq = EventSequence("x", [1e-6], 1e-6)
    with pytest.raises(DegenerateExposureError):
        mle_fitness(seq, ItemParams(1.0, 14.0, 0.01), ModelConfig(time_floor=1e-9))


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = ItemParams(rng.uniform(0.1, 2), rng.normal(1, 0.5), rng.uniform(0.4, 2))
        arr = np.sort(rng.uniform(0.05, 10, size=rng.integers(1, 40)))
        seq = EventSequence("x", arr, 10.0)
        g = grad_mu_sigma(seq, p, CFG)

        def ll(mu, sigma):
            return log_likelihood(seq, ItemParams(p.fitness, mu, sigma), CFG).log_lik
        fd_mu = central_difference(lambda x: ll(x, p.sigma), p.mu, 1e-6)
        fd_sigma = central_difference(lambda x: ll(p.mu, x), p.sigma, 1e-6)
        assert g[0] == pytest.approx(fd_mu, rel=1e-5, abs=1e-6)
        assert g[1] == pytest.approx(fd_sigma, rel=1e-5, abs=1e-6)


def test_zero_fitness_gradient_is_lognormal_score():
    seq = EventSequence("x", [0.5, 1.0, 3.0], 5.0)
    p = ItemParams(0.0, 0.2, 0.9)
    tau = (np.log(seq.arrivals) - 0.2) / 0.9
    assert grad_mu_sigma(seq, p, CFG)[0] == pytest.approx(tau.sum() / 0.9, rel=1e-14)


def _corpus(rng, k=6):
    seqs, thetas = [], []
    for i in range(k):
        arr = np.sort(rng.uniform(0.05, 10, size=rng.integers(0, 30)))
        seqs.append(EventSequence(f"d{i}", arr, 10.0))
        thetas.append((rng.normal(1, 0.4), rng.uniform(0.5, 1.5)))
    return seqs, np.array(thetas)


def test_prior_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    for _ in range(10):
        seqs, th = _corpus(rng)
        pk = PackedCorpus(seqs, CFG)
        a, b = rng.uniform(0.5, 6), rng.uniform(0.5, 6)
        prior = PriorParams(a, b)
        lam = [latent_fitness(s, ItemParams(1, *t), prior, CFG) for s, t in zip(seqs, th)]
        ga, gb = prior_gradients(lam, [s.n for s in seqs], prior)

        def f(x, y):
            return corpus_marginal_log_likelihood(pk, th[:, 0], th[:, 1], PriorParams(x, y))
        assert ga == pytest.approx(central_difference(lambda x: f(x, b), a, 1e-5), rel=1e-6)
        assert gb == pytest.approx(central_difference(lambda y: f(a, y), b, 1e-5), rel=1e-6)


def test_beta_gradient_vanishes_at_mean_match():
    lam = np.array([0.5, 1.5, 2.0])
    prior = PriorParams(2.0, 2.0 / lam.mean())
    assert prior_gradients(lam, [1, 2, 3], prior)[1] == pytest.approx(0.0, abs=1e-14)


def test_alpha_gradient_single_empty_item():
    prior = PriorParams(1.7, 0.6)
    lam = 0.9
    ga, _ = prior_gradients([lam], [0], prior)
    assert ga == pytest.approx(math.log(0.6 * lam / 1.7), rel=1e-13)


def test_latent_fitness_limits():
    seq = EventSequence("x", [1.0, 2.0, 4.0], 10.0)
    th = ItemParams(1.0, 1.0, 1.0)
    tiny = PriorParams(1e-12, 1e-12)
    assert latent_fitness(seq, th, tiny, CFG) == pytest.approx(mle_fitness(seq, th, CFG), rel=1e-10)
    empty = EventSequence("e", [], 10.0)
    prior = PriorParams(2.0, 3.0)
    want = 2.0 / (3.0 + 30 * relaxation_integral(10.0, th))
    assert latent_fitness(empty, th, prior, CFG) == pytest.approx(want, rel=1e-14)
    assert want > 0


def test_marginal_is_integrated_likelihood():
    from scipy import integrate
    seq = EventSequence("x", [0.4, 1.0, 2.5], 6.0)
    th = ItemParams(1.0, 0.8, 0.9)
    prior = PriorParams(2.5, 1.5)

    def integrand(lam):
        return math.exp(direct_log_likelihood(seq.arrivals, 6.0, lam, 0.8, 0.9, 30)
                        + 2.5 * math.log(1.5) - special.gammaln(2.5) + 1.5 * math.log(lam) - 1.5 * lam)
    z, _ = integrate.quad(integrand, 0, 50, epsrel=1e-12, limit=200)
    assert marginal_log_likelihood(seq, th, prior, CFG) == pytest.approx(math.log(z), rel=1e-10)


def test_prior_gradient_input_checks():
    with pytest.raises(InvalidParameterError):
        prior_gradients([1.0, 2.0], [1], PriorParams(1, 1))
    with pytest.raises(InvalidParameterError):
        prior_gradients([0.0], [1], PriorParams(1, 1))
