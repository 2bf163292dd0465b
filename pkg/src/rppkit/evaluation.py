"""Forecast scoring: MAPE, accuracy at a tolerance, horizon sweeps and
distribution-level comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import ks_2samp

__all__ = [
    "relative_errors",
    "mape",
    "accuracy",
    "distribution_compare",
    "HorizonScore",
    "EvalReport",
    "score_horizon",
    "horizon_sweep",
    "DEFAULT_EPSILON",
]

DEFAULT_EPSILON = 0.1


def relative_errors(predicted, realized, ids: Sequence[str] | None = None):
    """Absolute percentage errors for items with a positive realized value.

    Returns ``(errors, keep_mask, excluded)`` where ``excluded`` maps the ids
    (or positions) of dropped items to a reason.
    """
    c = np.asarray(predicted, dtype=float)
    r = np.asarray(realized, dtype=float)
    if c.shape != r.shape:
        raise ValueError("predicted and realized differ in length")
    keep = r > 0
    labels = list(ids) if ids is not None else list(range(r.size))
    excluded = {labels[i]: "realized value is not positive" for i in np.flatnonzero(~keep)}
    bad_pred = keep & ~np.isfinite(c)
    for i in np.flatnonzero(bad_pred):
        excluded[labels[i]] = "prediction is not finite"
    keep &= ~bad_pred
    return np.abs(c[keep] - r[keep]) / r[keep], keep, excluded


def mape(predicted, realized) -> float:
    err, _, _ = relative_errors(predicted, realized)
    return float(err.mean()) if err.size else math.nan


def accuracy(predicted, realized, epsilon: float = DEFAULT_EPSILON) -> float:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    err, _, _ = relative_errors(predicted, realized)
    return float(np.mean(err <= epsilon)) if err.size else math.nan


def distribution_compare(predicted, realized) -> float:
    """Two-sample Kolmogorov-Smirnov statistic between count distributions."""
    a = np.asarray(predicted, dtype=float)
    b = np.asarray(realized, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("distribution_compare needs non-empty samples")
    return float(ks_2samp(a, b).statistic)


@dataclass
class HorizonScore:
    horizon: float
    mape: float
    accuracy: float
    n_evaluated: int
    excluded: dict
    errors: dict
    ks: float | None = None


@dataclass
class EvalReport:
    model: str
    epsilon: float
    n_items: int
    scores: list[HorizonScore] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def horizons(self):
        return [s.horizon for s in self.scores]

    @property
    def mapes(self):
        return [s.mape for s in self.scores]

    @property
    def accuracies(self):
        return [s.accuracy for s in self.scores]

    def mean_mape(self, first: float = 1, last: float = 10) -> float:
        """Average MAPE over horizons in ``[first, last]`` (defaults: 1st to 10th period)."""
        vals = [s.mape for s in self.scores if first <= s.horizon <= last and not math.isnan(s.mape)]
        return float(np.mean(vals)) if vals else math.nan

    def mean_accuracy(self, first: float = 1, last: float = 10) -> float:
        vals = [s.accuracy for s in self.scores
                if first <= s.horizon <= last and not math.isnan(s.accuracy)]
        return float(np.mean(vals)) if vals else math.nan

    def to_dict(self, item_errors: bool = False):
        out = {
            "model": self.model,
            "epsilon": self.epsilon,
            "n_items": self.n_items,
            "mean_mape_1_10": _clean(self.mean_mape()),
            "mean_accuracy_1_10": _clean(self.mean_accuracy()),
            "horizons": [],
            "notes": list(self.notes),
        }
        for s in self.scores:
            h = {
                "horizon": s.horizon,
                "mape": _clean(s.mape),
                "accuracy": _clean(s.accuracy),
                "n_evaluated": s.n_evaluated,
                "n_excluded": len(s.excluded),
                "excluded": dict(sorted(s.excluded.items())),
            }
            if s.ks is not None:
                h["ks"] = s.ks
            if item_errors:
                h["errors"] = {k: float(v) for k, v in sorted(s.errors.items())}
            out["horizons"].append(h)
        return out


def _clean(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def score_horizon(horizon, predicted: Mapping[str, float], realized: Mapping[str, float],
                  epsilon: float = DEFAULT_EPSILON, with_ks: bool = False,
                  excluded: Mapping[str, str] | None = None) -> HorizonScore:
    """Score one horizon.

    ``realized`` defines the item universe; items missing from ``predicted``
    (or listed in ``excluded``) are ledgered, never imputed.
    """
    ledger = dict(excluded or {})
    ids, c, r = [], [], []
    for item_id, rv in realized.items():
        if item_id in ledger:
            continue
        if item_id not in predicted:
            ledger[item_id] = "no prediction"
            continue
        ids.append(item_id)
        c.append(predicted[item_id])
        r.append(rv)
    errs, keep, dropped = relative_errors(c, r, ids)
    ledger.update(dropped)
    kept_ids = [i for i, k in zip(ids, keep) if k]
    m = float(errs.mean()) if errs.size else math.nan
    a = float(np.mean(errs <= epsilon)) if errs.size else math.nan
    ks = None
    if with_ks and errs.size:
        ks = distribution_compare(np.asarray(c)[keep], np.asarray(r)[keep])
    return HorizonScore(horizon, m, a, len(kept_ids), ledger, dict(zip(kept_ids, errs)), ks)


def horizon_sweep(model: str, predictions: Mapping[float, Mapping[str, float]],
                  realized: Mapping[float, Mapping[str, float]], horizons: Sequence[float],
                  epsilon: float = DEFAULT_EPSILON, with_ks: bool = False,
                  excluded: Mapping[float, Mapping[str, str]] | None = None) -> EvalReport:
    n_items = len(next(iter(realized.values()))) if realized else 0
    rep = EvalReport(model, epsilon, n_items)
    for h in horizons:
        rep.scores.append(score_horizon(h, predictions.get(h, {}), realized[h], epsilon,
                                        with_ks, (excluded or {}).get(h)))
    return rep
