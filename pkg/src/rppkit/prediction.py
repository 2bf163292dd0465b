"""Closed-form popularity forecasts.

With ``Y = F(t) - F(T)`` the remaining relaxation mass between the end of the
window and the horizon:

* MLE:       ``c(t) = (m + n) exp(lam Y) - m``
* Bayesian:  ``<c(t)> = (m + n) ((beta + X) / (beta + X - Y))**(alpha + n) - m``
* variance:  ``(m + n)**2 [((b+X)/(b+X-2Y))**(a+n) - ((b+X)/(b+X-Y))**(2(a+n))]``

The Bayesian mean exists only for ``beta + X > Y`` and the variance only for
``beta + X > 2Y`` (the gamma moment-generating function's domain).  Every
formula is arranged as ``n + (m + n) * expm1(...)`` so that ``t = T`` returns
``n`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._special import norm_cdf, norm_sf
from .errors import DivergentForecastError, HorizonError, InvalidParameterError
from .likelihood import LikelihoodTerms, exposure
from .model import EventSequence, ItemParams, ModelConfig, PriorParams

__all__ = [
    "PredictionTerms",
    "Forecast",
    "mass_gap",
    "prediction_terms",
    "predict_mle",
    "predict_bayes",
    "predict_variance",
    "posterior",
    "mle_point",
    "bayes_point",
    "bayes_variance",
]


@dataclass(frozen=True)
class PredictionTerms:
    Y: float
    horizon: float


@dataclass(frozen=True)
class Forecast:
    horizon: float
    point: float
    variance: float | None
    variance_divergent: bool
    regime: str
    n: int

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "point": self.point,
            "variance": self.variance,
            "variance_status": ("divergent" if self.variance_divergent
                                else "n/a" if self.variance is None else "finite"),
            "regime": self.regime,
        }


def mass_gap(T, t, mu, sigma):
    """``F(t) - F(T)`` for ``t >= T``, taken from the tail that keeps precision."""
    T = np.asarray(T, dtype=float)
    t = np.asarray(t, dtype=float)
    zT = (np.log(T) - mu) / sigma
    with np.errstate(divide="ignore"):
        zt = (np.log(t) - mu) / sigma
    upper = zT >= 0
    return np.where(upper, norm_sf(zT) - norm_sf(zt), norm_cdf(zt) - norm_cdf(zT))


def _check_horizon(seq, t):
    if not t >= seq.window_end:
        raise HorizonError(f"horizon {t} precedes window end {seq.window_end}")


def prediction_terms(seq: EventSequence, params, t: float) -> PredictionTerms:
    _check_horizon(seq, t)
    return PredictionTerms(float(mass_gap(seq.window_end, t, params.mu, params.sigma)), float(t))


def mle_point(n, lam, Y, m):
    n = np.asarray(n, dtype=float)
    with np.errstate(over="ignore"):
        return n + (m + n) * np.expm1(lam * Y)


def bayes_point(n, X, Y, alpha, beta, m):
    """Posterior-mean forecast; ``inf`` where ``beta + X <= Y``."""
    n = np.asarray(n, dtype=float)
    base = beta + np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = Y / base
        expo = -(alpha + n) * np.log1p(-r)
        out = n + (m + n) * np.expm1(expo)
    return np.where(r < 1.0, out, np.inf)


def bayes_variance(n, X, Y, alpha, beta, m):
    """Posterior variance of the forecast; ``nan`` where ``beta + X <= 2Y``."""
    n = np.asarray(n, dtype=float)
    k = alpha + n
    base = beta + np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = Y / base
        two_b = -2.0 * k * np.log1p(-r)
        # A - B^2 = B^2 * expm1(k * log((1 - r)^2 / (1 - 2r)))
        excess = k * np.log1p(r * r / (1.0 - 2.0 * r))
        out = (m + n) ** 2 * np.exp(two_b) * np.expm1(excess)
    return np.where(r < 0.5, out, np.nan)


def predict_mle(seq: EventSequence, params: ItemParams, config: ModelConfig, t: float) -> Forecast:
    Y = prediction_terms(seq, params, t).Y
    point = float(mle_point(seq.n, params.fitness, Y, config.m))
    return Forecast(float(t), point, None, False, "mle", seq.n)


def _bayes_inputs(seq, params_theta, terms, config):
    if terms is None:
        return exposure(seq, params_theta, config)
    return terms.exposure


def predict_bayes(seq: EventSequence, params_theta, terms: LikelihoodTerms | None,
                  prior: PriorParams, config: ModelConfig, t: float) -> Forecast:
    """Posterior-mean forecast, with the variance attached (or flagged divergent).

    Raises :class:`DivergentForecastError` when the posterior mean itself does
    not exist.
    """
    Y = prediction_terms(seq, params_theta, t).Y
    X = _bayes_inputs(seq, params_theta, terms, config)
    if not prior.beta + X > Y:
        raise DivergentForecastError(
            f"{seq.item_id}: beta + X = {prior.beta + X} <= Y = {Y}; posterior mean diverges")
    point = float(bayes_point(seq.n, X, Y, prior.alpha, prior.beta, config.m))
    var = float(bayes_variance(seq.n, X, Y, prior.alpha, prior.beta, config.m))
    divergent = not math.isfinite(var)
    return Forecast(float(t), point, None if divergent else var, divergent, "bayes", seq.n)


def predict_variance(seq: EventSequence, params_theta, terms: LikelihoodTerms | None,
                     prior: PriorParams, config: ModelConfig, t: float) -> tuple[float | None, bool]:
    """``(variance, divergent)``; the variance is ``None`` when divergent."""
    Y = prediction_terms(seq, params_theta, t).Y
    X = _bayes_inputs(seq, params_theta, terms, config)
    var = float(bayes_variance(seq.n, X, Y, prior.alpha, prior.beta, config.m))
    if not math.isfinite(var):
        return None, True
    return var, False


def posterior(seq: EventSequence, params_theta, prior: PriorParams,
              config: ModelConfig) -> tuple[float, float]:
    """Gamma posterior ``(shape, rate) = (alpha + n, beta + X)`` of the fitness."""
    X = exposure(seq, params_theta, config)
    rate_ = prior.beta + X
    if not rate_ > 0:
        raise InvalidParameterError("posterior rate is not positive")
    return prior.alpha + seq.n, rate_


def forecast_grid(n, X, lam, mu, sigma, T, horizons, m, prior: PriorParams | None):
    """Vectorized forecasts for many items on a horizon grid.

    Returns ``(mle, bayes_mean, bayes_var)`` with shape ``(items, horizons)``;
    the Bayesian outputs are ``None`` when ``prior`` is.
    """
    n = np.asarray(n, dtype=float)[:, None]
    T = np.asarray(T, dtype=float)[:, None]
    H = np.asarray(horizons, dtype=float)
    H = np.broadcast_to(H if H.ndim == 2 else H[None, :], (n.shape[0], H.shape[-1]))
    if np.any(H < T):
        raise HorizonError("a horizon precedes its item's window end")
    Y = mass_gap(T, H, np.asarray(mu)[:, None], np.asarray(sigma)[:, None])
    mle = mle_point(n, np.asarray(lam)[:, None], Y, m)
    if prior is None:
        return mle, None, None
    Xc = np.asarray(X, dtype=float)[:, None]
    mean = bayes_point(n, Xc, Y, prior.alpha, prior.beta, m)
    var = bayes_variance(n, Xc, Y, prior.alpha, prior.beta, m)
    return mle, mean, var
