"""Side-by-side forecasting benchmark of the RPP regimes and the baselines.

Protocol: fit on events up to ``train_window``; forecast the cumulative count
at ``train_window + h * period`` for each horizon offset ``h``; score against
the events actually present in the data.  The RPP models see only the
training window.  AR and SH are leave-one-out and see the other items' values
at the target period.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import aggregate, fit_predict_ar, fit_predict_sh
from .errors import InvalidParameterError
from .estimation import FitReport, fit_corpus_mle, fit_corpus_with_prior
from .evaluation import DEFAULT_EPSILON, EvalReport, horizon_sweep
from .model import EventSequence, ModelConfig
from .prediction import bayes_point, mass_gap, mle_point

log = logging.getLogger(__name__)

MODELS = ("rpp-prior", "rpp-mle", "ar", "sh")

__all__ = ["MODELS", "BenchmarkResult", "run_benchmark", "realized_counts", "rpp_predictions"]


@dataclass
class BenchmarkResult:
    train_window: float
    period: float
    horizons: list[int]
    reports: dict[str, EvalReport]
    fits: dict[str, FitReport] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    n_items: int = 0

    def mean_mape(self, model: str) -> float:
        return self.reports[model].mean_mape()

    def to_dict(self, item_errors: bool = False):
        return {
            "train_window": self.train_window,
            "period": self.period,
            "horizons": list(self.horizons),
            "n_items": self.n_items,
            "warnings": list(self.warnings),
            "models": {k: v.to_dict(item_errors) for k, v in self.reports.items()},
        }


def realized_counts(sequences: Sequence[EventSequence], at: float) -> dict[str, float]:
    return {s.item_id: float(np.searchsorted(s.arrivals, at, side="right")) for s in sequences}


def rpp_predictions(train: Sequence[EventSequence], fit: FitReport, times: Sequence[float],
                    m: int) -> dict[float, dict[str, float]]:
    """Forecasts at absolute ``times`` from a fit report (Bayesian if it has a prior)."""
    out: dict[float, dict[str, float]] = {t: {} for t in times}
    seqs = [s for s in train if s.item_id in fit.per_item]
    if not seqs:
        return out
    fits = [fit.per_item[s.item_id] for s in seqs]
    n = np.array([s.n for s in seqs], dtype=float)
    T = np.array([s.window_end for s in seqs])
    mu = np.array([f.params.mu for f in fits])
    sigma = np.array([f.params.sigma for f in fits])
    for t in times:
        Y = mass_gap(T, np.maximum(t, T), mu, sigma)
        if fit.prior is not None:
            X = np.array([f.exposure for f in fits])
            c = bayes_point(n, X, Y, fit.prior.alpha, fit.prior.beta, m)
        else:
            lam = np.array([f.params.fitness for f in fits])
            c = mle_point(n, lam, Y, m)
        out[t] = {s.item_id: float(v) for s, v in zip(seqs, c)}
    return out


def run_benchmark(sequences: Sequence[EventSequence], train_window: float,
                  horizons: Sequence[int] = tuple(range(1, 11)), *,
                  models: Sequence[str] = MODELS, config: ModelConfig | None = None,
                  period: float = 1.0, epsilon: float = DEFAULT_EPSILON, ar_order: int = 3,
                  min_train_count: int = 0) -> BenchmarkResult:
    """Fit every requested model on the training window and score each horizon.

    ``horizons`` are offsets in periods after ``train_window``.  Offsets whose
    target time lies beyond an item's data window are dropped with a warning.
    Items with at most ``min_train_count`` training events are left out of
    the benchmark entirely.
    """
    config = config or ModelConfig()
    unknown = set(models) - set(MODELS)
    if unknown:
        raise InvalidParameterError(f"unknown models: {sorted(unknown)}")
    if not sequences:
        raise InvalidParameterError("benchmark needs at least one item")
    warnings: list[str] = []
    coverage = min(s.window_end for s in sequences)
    if train_window > coverage:
        raise InvalidParameterError(f"train window {train_window} exceeds data coverage {coverage}")
    hs = []
    for h in horizons:
        if train_window + h * period > coverage + 1e-9:
            warnings.append(f"horizon {h} beyond data coverage {coverage}; dropped")
        else:
            hs.append(int(h))
    for w in warnings:
        log.warning(w)

    full = [s for s in sequences]
    train = [s.truncate(train_window) for s in full]
    if min_train_count > 0:
        keep = [i for i, s in enumerate(train) if s.n > min_train_count]
        full = [full[i] for i in keep]
        train = [train[i] for i in keep]
    times = {h: train_window + h * period for h in hs}
    realized = {h: realized_counts(full, times[h]) for h in hs}
    result = BenchmarkResult(train_window, period, hs, {}, warnings=warnings, n_items=len(full))

    for model in models:
        preds: dict[int, dict[str, float]] = {}
        excluded: dict[int, dict[str, str]] = {}
        if model in ("rpp-prior", "rpp-mle"):
            if model == "rpp-prior":
                fit = fit_corpus_with_prior(train, config)
            else:
                fit = fit_corpus_mle(train, config)
            result.fits[model] = fit
            by_time = rpp_predictions(train, fit, [times[h] for h in hs], config.m)
            for h in hs:
                preds[h] = by_time[times[h]]
                # an item without events has MLE fitness 0: its forecast is its count, 0
                for item_id in fit.skipped:
                    preds[h][item_id] = 0.0
        else:
            train_end = int(round(train_window / period))
            if not math.isclose(train_end * period, train_window):
                raise InvalidParameterError("train window must be a whole number of periods")
            last = train_end + max(hs, default=0)
            series = [aggregate(s, period, periods=last) for s in full]
            for h in hs:
                if h == 0:
                    preds[h] = {c.item_id: c.cumulative(train_end) for c in series}
                    continue
                if model == "sh":
                    r = fit_predict_sh(series, train_end, train_end + h)
                else:
                    r = fit_predict_ar(series, ar_order, train_end, train_end + h)
                preds[h] = r.predictions
                excluded[h] = r.excluded
        result.reports[model] = horizon_sweep(model, preds, realized, hs, epsilon,
                                              with_ks=(model == "rpp-prior"), excluded=excluded)
    return result
