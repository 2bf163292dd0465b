"""Parameter estimation: per-item maximum likelihood and empirical Bayes.

MLE regime
    The fitness is profiled out analytically (``lam = n / X``) and the
    remaining ``(mu, sigma)`` problem is solved by quasi-Newton ascent.

Prior regime
    The corpus marginal likelihood (fitness integrated against a shared
    gamma prior) is maximized by alternating two exact ascent steps:

    a. per item, ``(mu, sigma)`` with the prior fixed;
    b. the prior: ``beta`` solves ``dL/dbeta = 0`` for each ``alpha`` and
       ``alpha`` is the root of the profiled ``dL/dalpha``.

    Each item's ``(mu, sigma)`` gradient of its marginal likelihood is the
    fixed-fitness gradient evaluated at the posterior-mean fitness, so step
    (a) uses the same quantities as the MLE regime.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._special import digamma, trigamma
from .errors import DegenerateFitError, IllPosedError
from .likelihood import CorpusStats, corpus_stats
from .model import EventSequence, ItemParams, ModelConfig, PackedCorpus, PriorParams
from .optimize import maximize_batch

log = logging.getLogger(__name__)

__all__ = [
    "PriorParams",
    "ItemFit",
    "FitReport",
    "initial_theta",
    "fit_item_mle",
    "fit_corpus_mle",
    "fit_corpus_with_prior",
    "solve_prior",
    "PriorSolution",
]


@dataclass(frozen=True)
class ItemFit:
    params: ItemParams
    log_lik: float
    iterations: int
    converged: bool
    grad_norm: float
    n: int
    exposure: float

    def to_dict(self):
        return {
            "fitness": self.params.fitness,
            "mu": self.params.mu,
            "sigma": self.params.sigma,
            "log_lik": self.log_lik,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "n": self.n,
            "exposure": self.exposure,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(ItemParams(d["fitness"], d["mu"], d["sigma"]), d["log_lik"], d["iterations"],
                   d["converged"], d["grad_norm"], d["n"], d["exposure"])


@dataclass
class FitReport:
    regime: str
    per_item: dict[str, ItemFit]
    prior: PriorParams | None
    corpus_log_lik: float
    config_echo: ModelConfig
    history: list[float] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))

    def to_dict(self):
        return {
            "regime": self.regime,
            "prior": None if self.prior is None else {"alpha": self.prior.alpha,
                                                      "beta": self.prior.beta},
            "corpus_log_lik": self.corpus_log_lik,
            "config": self.config_echo.to_dict(),
            "history": list(self.history),
            "skipped": dict(self.skipped),
            "diagnostics": dict(self.diagnostics),
            "items": {k: v.to_dict() for k, v in self.per_item.items()},
        }

    @classmethod
    def from_dict(cls, d):
        prior = d.get("prior")
        return cls(
            regime=d["regime"],
            per_item={k: ItemFit.from_dict(v) for k, v in d["items"].items()},
            prior=None if prior is None else PriorParams(prior["alpha"], prior["beta"]),
            corpus_log_lik=d["corpus_log_lik"],
            config_echo=ModelConfig.from_dict(d["config"]),
            history=list(d.get("history", [])),
            skipped=dict(d.get("skipped", {})),
            diagnostics=dict(d.get("diagnostics", {})),
        )


def initial_theta(seq: EventSequence, config: ModelConfig) -> tuple[float, float]:
    """Log of the median arrival (or of half the window when empty), unit sigma."""
    if seq.n:
        mu = math.log(max(float(np.median(seq.arrivals)), config.time_floor))
    else:
        mu = math.log(seq.window_end / 2.0)
    lo, hi = config.mu_bounds
    return min(max(mu, lo), hi), 1.0


def _profile_objective(packed):
    def objective(items, mu, sigma):
        st = CorpusStats(packed, items, mu, sigma)
        val, lam = st.profile_log_lik()
        g_mu, g_sig = st.grad_at_fitness(lam)
        val = np.where((st.X > 0) & np.isfinite(val), val, -np.inf)
        return val, g_mu, g_sig
    return objective


def _marginal_objective(packed, prior: PriorParams):
    def objective(items, mu, sigma):
        st = CorpusStats(packed, items, mu, sigma)
        val, lam = st.marginal_log_lik(prior.alpha, prior.beta)
        g_mu, g_sig = st.grad_at_fitness(lam)
        val = np.where(np.isfinite(val), val, -np.inf)
        return val, g_mu, g_sig
    return objective


def _start(packed: PackedCorpus, config, init):
    mu0 = np.empty(len(packed))
    s0 = np.empty(len(packed))
    for d, seq in enumerate(packed.sequences):
        if init is not None and seq.item_id in init:
            p = init[seq.item_id]
            mu0[d], s0[d] = p.mu, p.sigma
        else:
            mu0[d], s0[d] = initial_theta(seq, config)
    return mu0, np.clip(s0, *config.sigma_bounds)


def fit_corpus_mle(corpus: Sequence[EventSequence], config: ModelConfig,
                   init: dict[str, ItemParams] | None = None) -> FitReport:
    """Independent maximum-likelihood fits; items without events are skipped."""
    packed_all = [s for s in corpus]
    keep = [s for s in packed_all if s.n > 0]
    skipped = {s.item_id: "no events in the training window: MLE is degenerate"
               for s in packed_all if s.n == 0}
    per_item: dict[str, ItemFit] = {}
    total = 0.0
    if keep:
        packed = PackedCorpus(keep, config)
        mu0, s0 = _start(packed, config, init)
        res = maximize_batch(_profile_objective(packed), mu0, s0,
                             mu_bounds=config.mu_bounds, sigma_bounds=config.sigma_bounds,
                             tol=config.grad_tol, max_iter=config.max_inner)
        st = corpus_stats(packed, res.mu, res.sigma)
        val, lam = st.profile_log_lik()
        for d, seq in enumerate(keep):
            per_item[seq.item_id] = ItemFit(
                ItemParams(float(lam[d]), float(res.mu[d]), float(res.sigma[d])),
                float(val[d]), int(res.iterations[d]), bool(res.converged[d]),
                float(res.grad_norm[d]), seq.n, float(st.X[d]))
        total = math.fsum(val)
        if not res.converged.all():
            log.info("%d of %d MLE fits did not converge", int((~res.converged).sum()), len(keep))
    diagnostics = {
        "n_items": len(packed_all),
        "n_fitted": len(keep),
        "n_not_converged": sum(not f.converged for f in per_item.values()),
        "converged": all(f.converged for f in per_item.values()),
    }
    return FitReport("mle", per_item, None, total, config, skipped=skipped,
                     diagnostics=diagnostics)


def fit_item_mle(seq: EventSequence, config: ModelConfig,
                 init: ItemParams | None = None) -> tuple[ItemParams, dict]:
    """Maximum-likelihood ``(lam, mu, sigma)`` for one item (requires ``n >= 1``)."""
    if seq.n == 0:
        raise DegenerateFitError(
            f"{seq.item_id}: no events; the MLE fitness is 0 and (mu, sigma) are "
            "unidentified; use fit_corpus_with_prior")
    rep = fit_corpus_mle([seq], config, None if init is None else {seq.item_id: init})
    f = rep.per_item[seq.item_id]
    if not f.converged:
        log.warning("%s: MLE did not converge (grad norm %.3g)", seq.item_id, f.grad_norm)
    st0 = None
    if init is not None:
        packed = PackedCorpus([seq], config)
        st0 = corpus_stats(packed, [init.mu], [init.sigma])
    diag = {
        "log_lik": f.log_lik,
        "iterations": f.iterations,
        "converged": f.converged,
        "grad_norm": f.grad_norm,
        "exposure": f.exposure,
    }
    if st0 is not None:
        diag["initial_profile_log_lik"] = float(st0.profile_log_lik()[0][0])
    return f.params, diag


@dataclass(frozen=True)
class PriorSolution:
    prior: PriorParams
    grad_alpha: float
    grad_beta: float
    status: str


def _root(fun, lo, hi, x0, xtol=1e-13, maxiter=200):
    """Newton's method on a sign-changing bracket with bisection fallback.

    ``fun`` returns ``(value, derivative)`` and is decreasing on ``[lo, hi]``
    with ``fun(lo) > 0 > fun(hi)``.
    """
    x = min(max(x0, lo), hi)
    for _ in range(maxiter):
        v, dv = fun(x)
        if v == 0.0:
            return x
        if v > 0:
            lo = x
        else:
            hi = x
        step_ok = dv < 0 and math.isfinite(dv)
        xn = x - v / dv if step_ok else 0.5 * (lo + hi)
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= xtol * max(1.0, abs(x)) or hi - lo <= xtol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def _beta_given_alpha(alpha, n, X, log_beta0):
    """Unique root of ``N alpha / beta = sum (alpha + n) / (beta + X)``."""
    N = n.size
    a_n = alpha + n

    def fun(u):
        b = math.exp(u)
        r = b / (b + X)
        v = N * alpha - math.fsum(a_n * r)
        dv = -math.fsum(a_n * r * (1.0 - r))
        return v, dv

    lo, hi = log_beta0 - 1.0, log_beta0 + 1.0
    while fun(lo)[0] <= 0:
        lo -= 2.0 * (1 + abs(lo))
    while fun(hi)[0] >= 0:
        hi += 2.0 * (1 + abs(hi))
    return math.exp(_root(fun, lo, hi, log_beta0))


def _prior_partials(alpha, beta, n, X):
    N = n.size
    lam = (alpha + n) / (beta + X)
    g_b = N * alpha / beta - math.fsum(lam)
    g_a = (N * (math.log(beta) - float(digamma(alpha)))
           + math.fsum(np.log(lam / (alpha + n))) + math.fsum(digamma(alpha + n)))
    return g_a, g_b


def solve_prior(n, X, alpha0: float = 1.0, beta0: float = 1.0,
                bracket: tuple[float, float] = (1e-6, 1e6)) -> PriorSolution:
    """Maximize the corpus marginal likelihood over ``(alpha, beta)`` for fixed exposures.

    ``beta`` is eliminated through its stationarity condition; the profiled
    derivative in ``alpha`` is driven to zero by safeguarded Newton steps in
    ``log alpha`` (on the envelope, its derivative is
    ``L_aa - L_ab**2 / L_bb``).
    """
    n = np.asarray(n, dtype=float)
    X = np.asarray(X, dtype=float)
    if n.size == 0 or not np.any(n > 0):
        raise IllPosedError("prior estimation needs at least one item with events")
    N = n.size
    state = {"log_beta": math.log(beta0)}

    def profile(u):
        a = math.exp(u)
        b = _beta_given_alpha(a, n, X, state["log_beta"])
        state["log_beta"] = math.log(b)
        g_a, _ = _prior_partials(a, b, n, X)
        l_aa = -N * float(trigamma(a)) + math.fsum(trigamma(a + n))
        l_ab = N / b - math.fsum(1.0 / (b + X))
        l_bb = -N * a / b**2 + math.fsum((a + n) / (b + X) ** 2)
        d = l_aa - l_ab * l_ab / l_bb
        return g_a, a * d

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    status = "ok"
    v_lo, _ = profile(lo)
    if v_lo <= 0:
        u = lo
        status = "alpha_at_lower_bracket"
    else:
        v_hi, _ = profile(hi)
        if v_hi >= 0:
            u = hi
            status = "alpha_at_upper_bracket"
        else:
            u = _root(profile, lo, hi, math.log(min(max(alpha0, bracket[0]), bracket[1])))
    a = math.exp(u)
    b = _beta_given_alpha(a, n, X, state["log_beta"])
    g_a, g_b = _prior_partials(a, b, n, X)
    return PriorSolution(PriorParams(a, b), g_a, g_b, status)


def fit_corpus_with_prior(corpus: Sequence[EventSequence], config: ModelConfig,
                          prior_init: PriorParams | None = None, fix_prior: bool = False,
                          init: dict[str, ItemParams] | None = None) -> FitReport:
    """Empirical-Bayes fit of a shared gamma prior and per-item ``(mu, sigma)``.

    With ``fix_prior`` the prior is held at ``prior_init`` and only the item
    parameters are fitted.  Items without events keep their initial
    ``(mu, sigma)``: their marginal likelihood increases monotonically as the
    relaxation mass moves past the window, so there is no interior optimum.
    """
    seqs = list(corpus)
    if not seqs:
        raise IllPosedError("empty corpus")
    packed = PackedCorpus(seqs, config)
    if not np.any(packed.n > 0):
        raise IllPosedError("every item is empty; the prior is not identifiable")
    prior = prior_init or PriorParams(1.0, 1.0)
    mu, sigma = _start(packed, config, init)
    active = np.flatnonzero(packed.n > 0)
    n = packed.n.astype(float)

    history: list[float] = []
    statuses: list[str] = []
    iters = np.zeros(len(packed), dtype=np.int64)
    conv = np.ones(len(packed), dtype=bool)
    converged = False
    prior_tol = config.grad_tol * len(packed)
    sub = PackedSubset(packed, active)
    ll_prev = -math.inf
    outer = 0

    def theta_step():
        res = maximize_batch(sub.wrap(_marginal_objective(packed, prior)),
                             mu[active], sigma[active], mu_bounds=config.mu_bounds,
                             sigma_bounds=config.sigma_bounds, tol=config.grad_tol,
                             max_iter=config.max_inner)
        mu[active], sigma[active] = res.mu, res.sigma
        iters[active] += res.iterations
        conv[active] = res.converged
        return res

    stale = False
    for outer in range(1, config.max_outer + 1):
        res = theta_step()
        stale = False
        st = corpus_stats(packed, mu, sigma)
        vals, _ = st.marginal_log_lik(prior.alpha, prior.beta)
        ll = math.fsum(vals)
        history.append(ll)
        if fix_prior:
            converged = bool(res.converged.all())
            break
        g_a, g_b = _prior_partials(prior.alpha, prior.beta, n, st.X)
        small_change = abs(ll - ll_prev) <= config.loglik_rtol * max(1.0, abs(ll))
        if small_change and max(abs(g_a), abs(g_b)) <= prior_tol:
            converged = True
            break
        sol = solve_prior(n, st.X, prior.alpha, prior.beta, config.alpha_bracket)
        prior = sol.prior
        stale = True
        statuses.append(sol.status)
        if sol.status != "ok" and small_change:
            # prior pinned at its bracket: stationarity in alpha cannot be reached
            break
        ll_prev = ll

    if stale:
        # the loop stopped right after a prior update: refit (mu, sigma) to match it
        theta_step()
    st = corpus_stats(packed, mu, sigma)
    vals, lam = st.marginal_log_lik(prior.alpha, prior.beta)
    g_mu, g_sig = st.grad_at_fitness(lam)
    gnorm = np.hypot(g_mu, g_sig)
    gnorm[packed.n == 0] = 0.0
    per_item = {}
    for d, seq in enumerate(seqs):
        ok = bool(packed.n[d] == 0 or conv[d])
        per_item[seq.item_id] = ItemFit(
            ItemParams(float(lam[d]), float(mu[d]), float(sigma[d])), float(vals[d]),
            int(iters[d]), ok, float(gnorm[d]), seq.n, float(st.X[d]))
    g_a, g_b = _prior_partials(prior.alpha, prior.beta, n, st.X)
    diagnostics = {
        "converged": converged,
        "outer_iterations": outer,
        "n_items": len(seqs),
        "n_empty": int((packed.n == 0).sum()),
        "n_not_converged": sum(not f.converged for f in per_item.values()),
        "prior_grad_alpha": g_a,
        "prior_grad_beta": g_b,
        "prior_status": statuses[-1] if statuses else ("fixed" if fix_prior else "ok"),
        "fix_prior": fix_prior,
    }
    return FitReport("prior", per_item, prior, math.fsum(vals), config, history=history,
                     diagnostics=diagnostics)


class PackedSubset:
    """Maps optimizer row indices onto a subset of corpus items."""

    def __init__(self, packed: PackedCorpus, items: np.ndarray):
        self.packed = packed
        self.items = np.asarray(items, dtype=np.int64)

    def wrap(self, objective):
        items = self.items

        def sub(rows, mu, sigma):
            return objective(items[rows], mu, sigma)
        return sub
