"""Domain types, the log-normal relaxation function and the process rate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from ._special import LOG_SQRT_2PI, gammaln, norm_cdf, norm_sf
from .errors import DomainError, InvalidParameterError, InvalidSequenceError

__all__ = [
    "EventSequence",
    "ItemParams",
    "ModelConfig",
    "Relaxation",
    "LogNormalRelaxation",
    "LOGNORMAL",
    "relaxation",
    "log_relaxation",
    "relaxation_integral",
    "relaxation_survival",
    "rate",
    "PriorParams",
    "PackedCorpus",
]


@dataclass(frozen=True)
class EventSequence:
    """Sorted attention arrival times of one item inside ``[0, window_end]``."""

    item_id: str
    arrivals: np.ndarray
    window_end: float

    def __post_init__(self):
        arr = np.array(self.arrivals, dtype=float).reshape(-1)
        T = float(self.window_end)
        if not (math.isfinite(T) and T > 0):
            raise InvalidSequenceError(f"{self.item_id}: window_end must be finite and > 0, got {T}")
        if arr.size:
            if not np.all(np.isfinite(arr)):
                raise InvalidSequenceError(f"{self.item_id}: non-finite arrival time")
            if arr[0] < 0:
                raise InvalidSequenceError(f"{self.item_id}: negative arrival time {arr[0]}")
            if np.any(np.diff(arr) < 0):
                raise InvalidSequenceError(f"{self.item_id}: arrivals are not sorted")
            if arr[-1] > T:
                raise InvalidSequenceError(
                    f"{self.item_id}: arrival {arr[-1]} after window_end {T}")
        arr.setflags(write=False)
        object.__setattr__(self, "arrivals", arr)
        object.__setattr__(self, "window_end", T)
        object.__setattr__(self, "item_id", str(self.item_id))

    @property
    def n(self) -> int:
        return int(self.arrivals.size)

    def truncate(self, window_end: float) -> "EventSequence":
        """Restrict to events in ``[0, window_end]`` and move the window end there."""
        keep = self.arrivals[self.arrivals <= window_end]
        return EventSequence(self.item_id, keep, window_end)

    @classmethod
    def from_unsorted(cls, item_id, arrivals, window_end):
        return cls(item_id, np.sort(np.asarray(arrivals, dtype=float)), window_end)


@dataclass(frozen=True)
class ItemParams:
    fitness: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.fitness >= 0 and math.isfinite(self.fitness)):
            raise InvalidParameterError(f"fitness must be finite and >= 0, got {self.fitness}")
        if not math.isfinite(self.mu):
            raise InvalidParameterError(f"mu must be finite, got {self.mu}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidParameterError(f"sigma must be finite and > 0, got {self.sigma}")

    def with_fitness(self, fitness: float) -> "ItemParams":
        return replace(self, fitness=float(fitness))


@dataclass(frozen=True)
class ModelConfig:
    """Model and optimizer settings shared by a whole fit.

    ``m`` is the effective prior attention count added to the reinforcement
    factor.  Arrival times below ``time_floor`` are clamped before taking
    logarithms.  Tolerances are absolute on the gradient norm in
    ``(mu, sigma)`` and relative on the corpus log-likelihood.
    """

    m: int = 30
    time_floor: float = 1e-3
    grad_tol: float = 1e-6
    loglik_rtol: float = 1e-8
    max_outer: int = 200
    max_inner: int = 500
    sigma_bounds: tuple[float, float] = (1e-3, 1e2)
    mu_bounds: tuple[float, float] = (-15.0, 15.0)
    alpha_bracket: tuple[float, float] = (1e-6, 1e6)
    horizons: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise InvalidParameterError(f"m must be an integer >= 1, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if not self.time_floor > 0:
            raise InvalidParameterError("time_floor must be > 0")
        if not (self.grad_tol > 0 and self.loglik_rtol > 0):
            raise InvalidParameterError("tolerances must be > 0")
        if self.max_outer < 1 or self.max_inner < 1:
            raise InvalidParameterError("iteration caps must be >= 1")
        lo, hi = self.sigma_bounds
        if not 0 < lo < hi:
            raise InvalidParameterError("sigma_bounds must satisfy 0 < lo < hi")
        if not self.mu_bounds[0] < self.mu_bounds[1]:
            raise InvalidParameterError("mu_bounds must be increasing")
        object.__setattr__(self, "sigma_bounds", tuple(map(float, self.sigma_bounds)))
        object.__setattr__(self, "mu_bounds", tuple(map(float, self.mu_bounds)))
        object.__setattr__(self, "alpha_bracket", tuple(map(float, self.alpha_bracket)))
        object.__setattr__(self, "horizons", tuple(float(h) for h in self.horizons))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "time_floor": self.time_floor,
            "grad_tol": self.grad_tol,
            "loglik_rtol": self.loglik_rtol,
            "max_outer": self.max_outer,
            "max_inner": self.max_inner,
            "sigma_bounds": list(self.sigma_bounds),
            "mu_bounds": list(self.mu_bounds),
            "alpha_bracket": list(self.alpha_bracket),
            "horizons": list(self.horizons),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        kw = dict(d)
        for key in ("sigma_bounds", "mu_bounds", "alpha_bracket", "horizons"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


@dataclass(frozen=True)
class PriorParams:
    """Gamma prior over item fitness: shape ``alpha`` and rate ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidParameterError(f"alpha must be finite and > 0, got {self.alpha}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise InvalidParameterError(f"beta must be finite and > 0, got {self.beta}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def mean(self) -> float:
        return self.alpha / self.beta

    @property
    def variance(self) -> float:
        return self.alpha / self.beta ** 2


def _check_sigma(sigma):
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")


class Relaxation(Protocol):
    """Aging profile: a probability density on ``t > 0`` and its CDF."""

    def density(self, t, mu: float, sigma: float): ...

    def cdf(self, t, mu: float, sigma: float): ...


class LogNormalRelaxation:
    name = "lognormal"

    def log_density(self, t, mu, sigma):
        _check_sigma(sigma)
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)):
            raise DomainError("log-normal relaxation is only defined for t > 0")
        lt = np.log(t)
        z = (lt - mu) / sigma
        return -LOG_SQRT_2PI - math.log(sigma) - lt - 0.5 * z * z

    def density(self, t, mu, sigma):
        return np.exp(self.log_density(t, mu, sigma))

    def cdf(self, t, mu, sigma):
        _check_sigma(sigma)
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("relaxation integral requires t >= 0")
        with np.errstate(divide="ignore"):
            z = (np.log(t) - mu) / sigma
        return norm_cdf(z)

    def sf(self, t, mu, sigma):
        _check_sigma(sigma)
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("relaxation integral requires t >= 0")
        with np.errstate(divide="ignore"):
            z = (np.log(t) - mu) / sigma
        return norm_sf(z)


LOGNORMAL = LogNormalRelaxation()


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def relaxation(t, params: ItemParams):
    """Log-normal relaxation density ``f(t; mu, sigma)``."""
    return _out(LOGNORMAL.density(t, params.mu, params.sigma))


def log_relaxation(t, params: ItemParams):
    return _out(LOGNORMAL.log_density(t, params.mu, params.sigma))


def relaxation_integral(t, params: ItemParams):
    """Relaxation mass ``F(t) = Phi((ln t - mu) / sigma)`` accumulated on ``[0, t]``."""
    return _out(LOGNORMAL.cdf(t, params.mu, params.sigma))


def relaxation_survival(t, params: ItemParams):
    """``1 - F(t)`` computed without cancellation."""
    return _out(LOGNORMAL.sf(t, params.mu, params.sigma))


def rate(t, count_so_far, params: ItemParams, config: ModelConfig):
    """Conditional intensity ``lambda * f(t) * (m + count_so_far)``."""
    count = np.asarray(count_so_far)
    if np.any(count < 0):
        raise InvalidParameterError("count_so_far must be >= 0")
    return _out(params.fitness * LOGNORMAL.density(t, params.mu, params.sigma)
                * (config.m + count))


class PackedCorpus:
    """Ragged, clamped log-time representation of a list of sequences.

    Events of item ``d`` live in ``log_t[offsets[d]:offsets[d + 1]]``.  This is
    the layout consumed by the likelihood kernels.
    """

    def __init__(self, sequences: Sequence[EventSequence], config: ModelConfig):
        self.sequences = list(sequences)
        self.item_ids = [s.item_id for s in self.sequences]
        counts = np.array([s.n for s in self.sequences], dtype=np.int64)
        self.n = counts
        self.offsets = np.zeros(len(self.sequences) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.offsets[1:])
        if self.sequences and counts.sum():
            times = np.concatenate([s.arrivals for s in self.sequences])
        else:
            times = np.zeros(0)
        self.log_t = np.log(np.maximum(times, config.time_floor))
        window = np.array([s.window_end for s in self.sequences], dtype=float)
        self.window_end = window
        self.log_T = np.log(np.maximum(window, config.time_floor))
        self.m = float(config.m)
        # sum_i ln(m + i - 1) = ln Gamma(m + n) - ln Gamma(m)
        self.log_reinforcement = gammaln(self.m + counts) - gammaln(self.m)
        self.item_index = np.repeat(np.arange(len(self.sequences), dtype=np.int64), counts)

    def __len__(self):
        return len(self.sequences)

    def item_log_times(self, d: int) -> np.ndarray:
        return self.log_t[self.offsets[d]:self.offsets[d + 1]]
