"""Exact sampling of reinforced Poisson processes.

Between the (i-1)-th and i-th event the intensity is ``lam (m + i - 1) f(t)``,
so the relaxation mass gained until the next event is exponential with rate
``lam (m + i - 1)``.  Events are therefore generated in ``F`` space by a
cumulative sum of scaled exponentials and mapped back through the log-normal
quantile; there is no time discretization.

Random streams: replica (or corpus item) ``r`` of master seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(r,)))``.  Results are therefore
independent of how work is split across processes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._special import norm_ppf
from .errors import InvalidParameterError
from .model import EventSequence, ItemParams, ModelConfig, PriorParams, relaxation_integral

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "ThetaSpec",
    "SimulatedCorpus",
    "replica_rng",
    "simulate_item",
    "simulate",
    "simulate_corpus",
    "rescaled_intervals",
]

DEFAULT_MAX_EVENTS = 10**6


def replica_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class SimConfig:
    params: ItemParams
    m: int
    window_end: float
    seed: int = 0
    replicas: int = 1
    max_events: int = DEFAULT_MAX_EVENTS
    id_prefix: str = "r"

    def __post_init__(self):
        if not self.window_end > 0:
            raise InvalidParameterError("window_end must be > 0")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidParameterError("m must be an integer >= 1")
        if self.replicas < 0:
            raise InvalidParameterError("replicas must be >= 0")


def simulate_item(params: ItemParams, m: int, window_end: float, rng: np.random.Generator,
                  item_id: str = "item", max_events: int = DEFAULT_MAX_EVENTS,
                  history: EventSequence | None = None) -> EventSequence:
    """Exact draw by inversion: unit exponentials scaled by ``1 / (lam (m + i))`` are
    the gaps in relaxation mass ``F`` between events, mapped back through ``F^-1``.

    With ``history`` the sequence is continued from the end of that window
    (events kept, count carried over) up to ``window_end``.
    """
    lam = params.fitness
    prefix = np.zeros(0)
    level = 0.0
    if history is not None:
        if history.window_end > window_end:
            raise InvalidParameterError("history extends past window_end")
        prefix = np.asarray(history.arrivals)
        level = float(relaxation_integral(history.window_end, params))
    if lam == 0.0:
        return EventSequence(item_id, prefix.copy(), window_end)
    F_T = relaxation_integral(window_end, params)
    drawn = prefix.size
    # expected count by the window end, used only to size the first chunk
    guess = (m + drawn) * math.expm1(min(lam * (F_T - level), 50.0))
    chunk = int(min(max(16, 1.25 * guess + 16), max_events + 1))
    masses: list[np.ndarray] = []
    start = drawn
    while True:
        i = np.arange(drawn, drawn + chunk, dtype=float)
        steps = rng.standard_exponential(chunk) / (lam * (m + i))
        F = level + np.cumsum(steps)
        stop = np.searchsorted(F, F_T, side="left")
        if stop < chunk:
            masses.append(F[:stop])
            drawn += stop
            break
        masses.append(F)
        drawn += chunk
        level = F[-1]
        if drawn >= max_events:
            break
        chunk = max(1, min(2 * chunk, max_events - drawn + 1))
    F = np.concatenate(masses) if masses else np.zeros(0)
    if start + F.size > max_events:
        log.warning("%s: event cap %d reached; sequence truncated", item_id, max_events)
        F = F[:max(0, max_events - start)]
    t = np.exp(params.mu + params.sigma * norm_ppf(F))
    floor = prefix[-1] if prefix.size else 0.0
    if history is not None:
        floor = max(floor, history.window_end)
    t = np.minimum(np.maximum.accumulate(np.maximum(t, floor)), window_end)
    return EventSequence(item_id, np.concatenate((prefix, t)), window_end)


def simulate(sim: SimConfig) -> list[EventSequence]:
    """``sim.replicas`` independent sequences sharing one parameter set."""
    return [
        simulate_item(sim.params, sim.m, sim.window_end, replica_rng(sim.seed, r),
                      item_id=f"{sim.id_prefix}{r:06d}", max_events=sim.max_events)
        for r in range(sim.replicas)
    ]


_KINDS = {"fixed", "normal", "uniform", "lognormal"}


def _draw(spec, rng):
    kind, *args = spec
    if kind == "fixed":
        return float(args[0])
    if kind == "normal":
        return float(rng.normal(args[0], args[1]))
    if kind == "uniform":
        return float(rng.uniform(args[0], args[1]))
    if kind == "lognormal":
        return float(rng.lognormal(args[0], args[1]))
    raise InvalidParameterError(f"unknown distribution {kind!r}")


@dataclass(frozen=True)
class ThetaSpec:
    """Sampling distributions for the relaxation parameters.

    Each entry is ``(kind, *args)`` with kind one of ``fixed``, ``normal``,
    ``uniform``, ``lognormal``; e.g. ``("normal", 1.0, 0.25)``.
    """

    mu: tuple = ("normal", 1.0, 0.25)
    sigma: tuple = ("uniform", 0.5, 1.5)

    def __post_init__(self):
        for name, spec in (("mu", self.mu), ("sigma", self.sigma)):
            if not spec or spec[0] not in _KINDS:
                raise InvalidParameterError(f"{name}: unknown distribution {spec!r}")
        kind, *args = self.sigma
        if kind == "normal":
            raise InvalidParameterError("sigma needs a positive distribution")
        if kind in ("fixed", "uniform") and min(args) <= 0:
            raise InvalidParameterError("sigma distribution must have positive support")

    def to_dict(self):
        return {"mu": list(self.mu), "sigma": list(self.sigma)}

    @classmethod
    def from_dict(cls, d):
        return cls(mu=tuple(d["mu"]), sigma=tuple(d["sigma"]))


@dataclass
class SimulatedCorpus:
    sequences: list[EventSequence]
    truth: list[ItemParams]
    prior: PriorParams | None = None
    theta: ThetaSpec | None = None
    seed: int = 0
    window_end: float = 0.0
    m: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.sequences)

    def truncated(self, window_end: float) -> list[EventSequence]:
        return [s.truncate(window_end) for s in self.sequences]


def simulate_corpus(prior: PriorParams, theta_sampler: ThetaSpec, count: int,
                    config: ModelConfig, window_end: float, seed: int = 0,
                    max_events: int = DEFAULT_MAX_EVENTS, id_prefix: str = "d") -> SimulatedCorpus:
    """Draw ``count`` items: fitness from the gamma prior, then (mu, sigma), then events.

    Item ``d`` draws all of its randomness, parameters included, from stream
    ``d`` of ``seed``.
    """
    if count < 0:
        raise InvalidParameterError("count must be >= 0")
    seqs, truth = [], []
    for d in range(count):
        rng = replica_rng(seed, d)
        lam = float(rng.gamma(prior.alpha, 1.0 / prior.beta))
        mu = _draw(theta_sampler.mu, rng)
        sigma = _draw(theta_sampler.sigma, rng)
        p = ItemParams(lam, mu, sigma)
        truth.append(p)
        seqs.append(simulate_item(p, config.m, window_end, rng, item_id=f"{id_prefix}{d:06d}",
                                  max_events=max_events))
    return SimulatedCorpus(seqs, truth, prior=prior, theta=theta_sampler, seed=seed,
                           window_end=window_end, m=config.m)


def rescaled_intervals(seq: EventSequence, params: ItemParams, m: int) -> np.ndarray:
    """Compensator increments ``lam (m + i - 1) (F(t_i) - F(t_{i-1}))``.

    Unit exponentials under the true parameters (time-rescaling theorem).
    """
    F = np.concatenate(([0.0], np.atleast_1d(relaxation_integral(
        np.asarray(seq.arrivals), params)))) if seq.n else np.zeros(1)
    i = np.arange(1, seq.n + 1, dtype=float)
    return params.fitness * (m + i - 1) * np.diff(F)
