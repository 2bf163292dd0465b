"""Log-likelihood of the reinforced Poisson process and its derivatives.

For one item with arrivals ``t_1..t_n`` in ``[0, T]``::

    ln L = n ln(lam) + sum_i ln(m + i - 1) + sum_i ln f(t_i) - lam * X
    X    = (m + n) F(T) - sum_i F(t_i)

``X`` (the effective exposure) is the only place the fitness meets the
data, which is what makes the gamma prior conjugate.  Corpus-level, vectorized
versions of every quantity live at the bottom of the module and are what the
estimators call; the per-sequence functions are thin wrappers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend as kb
from ._special import digamma, gammaln, norm_pdf
from .errors import DegenerateExposureError, InvalidParameterError
from .model import EventSequence, ItemParams, ModelConfig, PackedCorpus, PriorParams

__all__ = [
    "LikelihoodTerms",
    "GradientWorkspace",
    "gradient_workspace",
    "exposure",
    "log_likelihood",
    "mle_fitness",
    "grad_mu_sigma",
    "prior_gradients",
    "latent_fitness",
    "marginal_log_likelihood",
    "corpus_marginal_log_likelihood",
    "CorpusStats",
    "corpus_stats",
]


@dataclass(frozen=True)
class LikelihoodTerms:
    exposure: float
    log_lik: float
    n: int

    @property
    def X(self) -> float:
        return self.exposure


@dataclass(frozen=True)
class GradientWorkspace:
    """Standardized log-times and normal densities used by the gradients."""

    tau_i: np.ndarray
    tau_T: float
    phi_i: np.ndarray
    phi_T: float


def _theta(params):
    mu, sigma = float(params.mu), float(params.sigma)
    if not math.isfinite(mu):
        raise InvalidParameterError(f"mu must be finite, got {mu}")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    return mu, sigma


class CorpusStats:
    """Kernel output for a set of items at given ``(mu, sigma)``."""

    def __init__(self, packed: PackedCorpus, items, mu, sigma):
        self.items = np.asarray(items, dtype=np.int64)
        self.mu = np.asarray(mu, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        raw = kb.item_stats(packed.log_t, packed.offsets, packed.log_T,
                            self.mu, self.sigma, packed.m, self.items)
        self.n = packed.n[self.items].astype(float)
        self.log_reinforcement = packed.log_reinforcement[self.items]
        self.sum_logf = raw[kb.SUM_LOGF]
        self.X = raw[kb.EXPOSURE]
        self.dX_dmu = raw[kb.DX_DMU]
        self.dX_dsigma = raw[kb.DX_DSIGMA]
        self.dlogf_dmu = raw[kb.DLOGF_DMU]
        self.dlogf_dsigma = raw[kb.DLOGF_DSIGMA]
        self.F_T = raw[kb.F_T]

    def grad_at_fitness(self, lam):
        """(dlnL/dmu, dlnL/dsigma) with the fitness held at ``lam``."""
        return (self.dlogf_dmu - lam * self.dX_dmu,
                self.dlogf_dsigma - lam * self.dX_dsigma)

    def log_lik_at_fitness(self, lam):
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            n_log_lam = np.where(self.n > 0, self.n * np.log(lam), 0.0)
        return n_log_lam + self.log_reinforcement + self.sum_logf - lam * self.X

    def profile_log_lik(self):
        """ln L with the fitness replaced by its maximizer ``n / X``."""
        n, X = self.n, self.X
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(n > 0, n / X, 0.0)
            head = np.where(n > 0, n * np.log(lam) - n, 0.0)
        return head + self.log_reinforcement + self.sum_logf, lam

    def marginal_log_lik(self, alpha, beta):
        """ln of the likelihood integrated against a gamma(alpha, beta) prior."""
        n, X = self.n, self.X
        a_n = alpha + n
        val = (alpha * math.log(beta) - gammaln(alpha) + gammaln(a_n)
               - a_n * np.log(beta + X) + self.log_reinforcement + self.sum_logf)
        return val, a_n / (beta + X)


def corpus_stats(packed: PackedCorpus, mu, sigma, items=None) -> CorpusStats:
    if items is None:
        items = np.arange(len(packed), dtype=np.int64)
    return CorpusStats(packed, items, mu, sigma)


def _single(seq: EventSequence, params, config: ModelConfig) -> CorpusStats:
    mu, sigma = _theta(params)
    packed = PackedCorpus([seq], config)
    return CorpusStats(packed, [0], [mu], [sigma])


def exposure(seq: EventSequence, params, config: ModelConfig) -> float:
    """``X = (m + n) F(T) - sum_i F(t_i)``; never negative for valid input."""
    return float(_single(seq, params, config).X[0])


def log_likelihood(seq: EventSequence, params: ItemParams, config: ModelConfig) -> LikelihoodTerms:
    """Log-likelihood and exposure of ``seq`` under ``params``.

    A zero fitness with events present yields ``-inf`` rather than raising, so
    that optimizers can reject the point.
    """
    st = _single(seq, params, config)
    lam = float(params.fitness)
    if lam < 0 or not math.isfinite(lam):
        raise InvalidParameterError(f"fitness must be finite and >= 0, got {lam}")
    if lam == 0.0 and seq.n > 0:
        ll = -math.inf
    else:
        ll = float(st.log_lik_at_fitness(lam)[0])
    return LikelihoodTerms(exposure=float(st.X[0]), log_lik=ll, n=seq.n)


def mle_fitness(seq: EventSequence, params_theta, config: ModelConfig) -> float:
    """Closed-form maximizer of ln L in the fitness: ``n / X``."""
    if seq.n == 0:
        return 0.0
    X = exposure(seq, params_theta, config)
    if not X > 0:
        raise DegenerateExposureError(f"{seq.item_id}: exposure {X} with {seq.n} events")
    return seq.n / X


def gradient_workspace(seq: EventSequence, params, config: ModelConfig) -> GradientWorkspace:
    mu, sigma = _theta(params)
    lt = np.log(np.maximum(seq.arrivals, config.time_floor))
    tau = (lt - mu) / sigma
    tau_T = (math.log(max(seq.window_end, config.time_floor)) - mu) / sigma
    return GradientWorkspace(tau_i=tau, tau_T=tau_T, phi_i=norm_pdf(tau), phi_T=float(norm_pdf(tau_T)))


def grad_mu_sigma(seq: EventSequence, params: ItemParams, config: ModelConfig) -> tuple[float, float]:
    """Analytic ``(dlnL/dmu, dlnL/dsigma)`` at fixed fitness."""
    ws = gradient_workspace(seq, params, config)
    lam = float(params.fitness)
    sigma = float(params.sigma)
    n = seq.n
    w = lam * (n + config.m)
    g_mu = (np.sum(ws.tau_i - lam * ws.phi_i) + w * ws.phi_T) / sigma
    g_sigma = (np.sum(ws.tau_i * ws.tau_i - lam * ws.tau_i * ws.phi_i)
               + w * ws.tau_T * ws.phi_T - n) / sigma
    return float(g_mu), float(g_sigma)


def prior_gradients(latent_fitness: Sequence[float], counts: Sequence[int],
                    prior: PriorParams) -> tuple[float, float]:
    """Partial derivatives ``(dL/dalpha, dL/dbeta)`` of the corpus marginal likelihood.

    ``latent_fitness`` must be the posterior means ``(alpha + n) / (beta + X)``
    evaluated at ``prior`` for these to be exact derivatives.
    """
    lam = np.asarray(latent_fitness, dtype=float)
    n = np.asarray(counts, dtype=float)
    a, b = prior.alpha, prior.beta
    if lam.shape != n.shape:
        raise InvalidParameterError("latent_fitness and counts differ in length")
    if np.any(~(lam > 0)):
        raise InvalidParameterError("latent fitness values must be > 0")
    N = lam.size
    d_beta = N * a / b - math.fsum(lam)
    d_alpha = (N * (math.log(b) - float(digamma(a)))
               + math.fsum(np.log(lam / (a + n)))
               + math.fsum(np.atleast_1d(digamma(a + n))))
    return float(d_alpha), float(d_beta)


def latent_fitness(seq: EventSequence, params_theta, prior: PriorParams,
                   config: ModelConfig) -> float:
    """Posterior-mean fitness ``(alpha + n) / (beta + X)``."""
    X = exposure(seq, params_theta, config)
    denom = prior.beta + X
    if not denom > 0:
        raise InvalidParameterError(f"beta + X = {denom} is not positive")
    return (prior.alpha + seq.n) / denom


def marginal_log_likelihood(seq: EventSequence, params_theta, prior: PriorParams,
                            config: ModelConfig) -> float:
    st = _single(seq, params_theta, config)
    val, _ = st.marginal_log_lik(prior.alpha, prior.beta)
    return float(val[0])


def corpus_marginal_log_likelihood(packed: PackedCorpus, mu, sigma, prior: PriorParams) -> float:
    st = corpus_stats(packed, mu, sigma)
    val, _ = st.marginal_log_lik(prior.alpha, prior.beta)
    return math.fsum(val)
