import math

import numpy as np
import pytest
from scipy import integrate

from rppkit.errors import DomainError, InvalidParameterError, InvalidSequenceError
from rppkit.model import (
    EventSequence,
    ItemParams,
    ModelConfig,
    PackedCorpus,
    PriorParams,
    rate,
    relaxation,
    relaxation_integral,
    relaxation_survival,
)


def theta(mu, sigma, lam=1.0):
    return ItemParams(lam, mu, sigma)


def test_density_at_the_median_time():
    for sigma in (0.3, 1.0, 2.5):
        mu = 0.7
        want = math.exp(-mu) / (math.sqrt(2 * math.pi) * sigma)
        assert relaxation(math.exp(mu), theta(mu, sigma)) == pytest.approx(want, rel=1e-14)


def test_density_unit_case():
    assert relaxation(1.0, theta(0.0, 1.0)) == pytest.approx(0.3989422804014327, rel=1e-15)


def test_density_is_derivative_of_integral():
    p = theta(0.5, 1.2)
    h = 1e-5
    fd = (relaxation_integral(2 + h, p) - relaxation_integral(2 - h, p)) / (2 * h)
    assert relaxation(2.0, p) == pytest.approx(fd, rel=1e-9)


def test_integral_boundaries():
    p = theta(1.3, 0.6)
    assert relaxation_integral(0.0, p) == 0.0
    assert relaxation_integral(math.exp(1.3), p) == pytest.approx(0.5, abs=1e-15)


def test_integral_matches_quadrature():
    p = theta(1.0, 0.5)
    q, _ = integrate.quad(lambda t: relaxation(t, p), 0, 3, epsabs=1e-14, epsrel=1e-13)
    assert relaxation_integral(3.0, p) == pytest.approx(q, abs=1e-9)


def test_survival_keeps_precision_far_in_the_tail():
    p = theta(0.0, 0.5)
    s = relaxation_survival(math.exp(5.0), p)  # z = 10
    assert s == pytest.approx(7.619853024160527e-24, rel=1e-12)
    assert relaxation_integral(math.exp(5.0), p) == 1.0


def test_domain_errors():
    p = theta(0.0, 1.0)
    with pytest.raises(DomainError):
        relaxation(0.0, p)
    with pytest.raises(DomainError):
        relaxation_integral(-1.0, p)
    with pytest.raises(InvalidParameterError):
        ItemParams(1.0, 0.0, 0.0)
    with pytest.raises(InvalidParameterError):
        ItemParams(-1.0, 0.0, 1.0)


def test_rate_properties():
    cfg = ModelConfig(m=30)
    p = ItemParams(0.8, 1.0, 0.7)
    assert rate(2.0, 0, p.with_fitness(0.0), cfg) == 0.0
    assert rate(2.0, 0, p, cfg) == pytest.approx(30 * 0.8 * relaxation(2.0, p), rel=1e-15)
    # doubling m + count doubles the rate
    assert rate(2.0, 30, p, cfg) == pytest.approx(2 * rate(2.0, 0, p, cfg), rel=1e-15)
    with pytest.raises(InvalidParameterError):
        rate(2.0, -1, p, cfg)


def test_event_sequence_validation():
    with pytest.raises(InvalidSequenceError):
        EventSequence("a", [2.0, 1.0], 5.0)
    with pytest.raises(InvalidSequenceError):
        EventSequence("a", [1.0, 6.0], 5.0)
    with pytest.raises(InvalidSequenceError):
        EventSequence("a", [-0.1], 5.0)
    with pytest.raises(InvalidSequenceError):
        EventSequence("a", [1.0], 0.0)
    with pytest.raises(InvalidSequenceError):
        EventSequence("a", [np.nan], 5.0)
    s = EventSequence.from_unsorted("a", [3.0, 1.0, 2.0], 5.0)
    assert list(s.arrivals) == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        s.arrivals[0] = 9.0


def test_truncate():
    s = EventSequence("a", [1.0, 2.0, 3.0], 5.0)
    t = s.truncate(2.0)
    assert t.n == 2 and t.window_end == 2.0
    assert s.truncate(0.5).n == 0


def test_prior_params():
    p = PriorParams(4.0, 2.0)
    assert p.mean == 2.0 and p.variance == 1.0
    for bad in ((0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)):
        with pytest.raises(InvalidParameterError):
            PriorParams(*bad)


def test_config_validation_and_round_trip():
    for kw in (dict(m=0), dict(m=2.5), dict(grad_tol=0), dict(sigma_bounds=(0, 1)),
               dict(max_inner=0)):
        with pytest.raises(InvalidParameterError):
            ModelConfig(**kw)
    cfg = ModelConfig(m=12, horizons=(1, 2))
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_packed_corpus_layout():
    cfg = ModelConfig(m=3)
    seqs = [EventSequence("a", [0.0, 1.0], 2.0), EventSequence("b", [], 3.0),
            EventSequence("c", [0.5], 1.0)]
    pk = PackedCorpus(seqs, cfg)
    assert list(pk.offsets) == [0, 2, 2, 3]
    assert pk.log_t[0] == math.log(cfg.time_floor)  # t = 0 is clamped
    assert pk.item_log_times(1).size == 0
    np.testing.assert_allclose(pk.log_reinforcement,
                               [math.log(3 * 4), 0.0, math.log(3)], rtol=1e-14, atol=1e-14)
    assert list(pk.item_index) == [0, 0, 2]
