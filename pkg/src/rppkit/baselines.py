"""Time-series baselines: pooled autoregression (AR) and log-log regression (SH).

Both are fitted leave-one-out: the prediction for item ``d`` uses a model
estimated on every other item, including those items' values at the target
period.  Per-item sufficient statistics are combined from prefix and suffix sums,
so a full leave-one-out pass costs O(N) and the held-out item's values never
enter its own fit, not even through rounding.

Period indices are 1-based: ``cumulative(k)`` is the count at the end of
period ``k`` and ``cumulative(0) == 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError
from .model import EventSequence

__all__ = [
    "CountSeries",
    "aggregate",
    "BaselineResult",
    "fit_predict_sh",
    "fit_predict_ar",
]


@dataclass(frozen=True)
class CountSeries:
    item_id: str
    counts: np.ndarray  # cumulative count at the end of periods 1..K

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=float).reshape(-1)
        if c.size and (np.any(np.diff(c) < 0) or c[0] < 0):
            raise InvalidParameterError(f"{self.item_id}: cumulative counts must be non-decreasing")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return self.counts.size

    def cumulative(self, k: int) -> float:
        return 0.0 if k == 0 else float(self.counts[k - 1])

    def increments(self) -> np.ndarray:
        return np.diff(np.concatenate(([0.0], self.counts)))


def aggregate(seq: EventSequence, period: float, periods: int | None = None) -> CountSeries:
    """Cumulative counts at ``period, 2 period, ...`` up to the window end."""
    if not period > 0:
        raise InvalidParameterError("period must be > 0")
    if periods is None:
        periods = int(math.floor(seq.window_end / period + 1e-9))
    edges = period * np.arange(1, periods + 1)
    counts = np.searchsorted(seq.arrivals, edges, side="right")
    return CountSeries(seq.item_id, counts)


@dataclass
class BaselineResult:
    predictions: dict[str, float]
    coefficients: dict[str, np.ndarray]
    excluded: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def _leave_one_out_sums(rows: np.ndarray) -> np.ndarray:
    """``out[d] = sum of rows[j] for j != d`` without ever adding row ``d``."""
    k = rows.shape[0]
    prefix = np.zeros((k + 1,) + rows.shape[1:])
    np.cumsum(rows, axis=0, out=prefix[1:])
    suffix = np.zeros((k + 1,) + rows.shape[1:])
    np.cumsum(rows[::-1], axis=0, out=suffix[1:])
    suffix = suffix[::-1]  # suffix[d] = sum rows[d:]
    return prefix[:-1] + suffix[1:]


def _check_periods(train_end, target):
    if not target > train_end:
        raise InvalidParameterError("target period must be after train_end")


def fit_predict_sh(corpus: Sequence[CountSeries], train_end: int, target: int) -> BaselineResult:
    """Leave-one-out regression of ``ln c(target)`` on ``ln c(train_end)``.

    With fewer than two distinct training regressors the slope is fixed at 1
    and only the intercept (the mean log growth ratio) is estimated.
    """
    _check_periods(train_end, target)
    res = BaselineResult({}, {})
    usable = []
    for s in corpus:
        if len(s) < target:
            res.excluded[s.item_id] = "series shorter than target period"
        elif s.cumulative(train_end) <= 0:
            res.excluded[s.item_id] = "zero count at train_end (log undefined)"
        else:
            usable.append(s)
    if not usable:
        return res
    x = np.array([math.log(s.cumulative(train_end)) for s in usable])
    y = np.array([math.log(s.cumulative(target)) for s in usable])
    others = _leave_one_out_sums(np.column_stack([np.ones_like(x), x, y, x * x, x * y]))
    for d, s in enumerate(usable):
        n, sx, sy, sxx, sxy = others[d]
        if n < 1:
            res.excluded[s.item_id] = "no other items to train on"
            continue
        var = sxx - sx * sx / n
        if n >= 2 and var > 1e-12 * max(1.0, sxx):
            slope = (sxy - sx * sy / n) / var
            icpt = (sy - slope * sx) / n
        else:
            slope = 1.0
            icpt = (sy - sx) / n
            if "slope fixed at 1 (degenerate design)" not in res.notes:
                res.notes.append("slope fixed at 1 (degenerate design)")
        pred = math.exp(icpt + slope * x[d])
        res.predictions[s.item_id] = max(pred, s.cumulative(train_end))
        res.coefficients[s.item_id] = np.array([icpt, slope])
    return res


def _ar_rows(inc: np.ndarray, p: int, last: int):
    """Design rows ``[1, x_{k-1}, ..., x_{k-p}] -> x_k`` for periods ``p+1..last``."""
    if last <= p:
        return np.zeros((0, p + 1)), np.zeros(0)
    ks = np.arange(p + 1, last + 1)
    X = np.ones((ks.size, p + 1))
    for j in range(1, p + 1):
        X[:, j] = inc[ks - 1 - j]
    return X, inc[ks - 1]


def fit_predict_ar(corpus: Sequence[CountSeries], order: int, train_end: int,
                   target: int) -> BaselineResult:
    """Leave-one-out pooled AR(p) with intercept on per-period increments.

    The model for item ``d`` is fitted on every other item's increments up to
    ``target``; ``d``'s own increments up to ``train_end`` seed the recursion,
    which is iterated forward to ``target``.  The cumulative prediction is
    floored at the last observed count.
    """
    _check_periods(train_end, target)
    p = int(order)
    if p < 1:
        raise InvalidParameterError("AR order must be >= 1")
    res = BaselineResult({}, {})
    usable = []
    for s in corpus:
        if len(s) < target:
            res.excluded[s.item_id] = "series shorter than target period"
        elif train_end < p:
            res.excluded[s.item_id] = f"insufficient history: train_end {train_end} < order {p}"
        else:
            usable.append(s)
    if not usable:
        return res
    q = p + 1
    stats = np.zeros((len(usable), q * q + q))
    for d, s in enumerate(usable):
        X, y = _ar_rows(s.increments(), p, target)
        stats[d, :q * q] = (X.T @ X).ravel()
        stats[d, q * q:] = X.T @ y
    others = _leave_one_out_sums(stats)
    for d, s in enumerate(usable):
        if len(usable) < 2:
            res.excluded[s.item_id] = "no other items to train on"
            continue
        G = others[d, :q * q].reshape(q, q)
        b = others[d, q * q:]
        w = np.linalg.lstsq(G, b, rcond=None)[0]
        hist = list(s.increments()[:train_end])
        for _k in range(train_end + 1, target + 1):
            lags = hist[-1:-p - 1:-1]
            hist.append(w[0] + float(np.dot(w[1:], lags)))
        pred = s.cumulative(train_end) + sum(hist[train_end:])
        res.predictions[s.item_id] = max(pred, s.cumulative(train_end))
        res.coefficients[s.item_id] = w
    return res
