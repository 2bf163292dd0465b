"""Batched box-constrained quasi-Newton ascent for per-item 2-D problems.

Every item owns an independent problem in ``(mu, log sigma)``.  The items are
advanced together so each objective call is one vectorized kernel pass over
the corpus instead of a Python loop over items.  Convergence is judged on
the projected gradient in the original ``(mu, sigma)`` coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# objective(items, mu, sigma) -> (value, dvalue/dmu, dvalue/dsigma), all shape (k,)
Objective = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]

_ARMIJO = 1e-4
_MAX_HALVINGS = 60
_MAX_STEP = 2.0
_NOISE = 64 * np.finfo(float).eps


@dataclass
class BatchResult:
    mu: np.ndarray
    sigma: np.ndarray
    value: np.ndarray
    grad_norm: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    initial_value: np.ndarray


def _projected(x, g, lo, hi):
    pg = g.copy()
    pg[(x <= lo) & (g < 0)] = 0.0
    pg[(x >= hi) & (g > 0)] = 0.0
    return pg


def maximize_batch(objective: Objective, mu0, sigma0, *, mu_bounds, sigma_bounds,
                   tol: float, max_iter: int) -> BatchResult:
    mu0 = np.asarray(mu0, dtype=float)
    k = mu0.size
    lo = np.array([mu_bounds[0], np.log(sigma_bounds[0])])
    hi = np.array([mu_bounds[1], np.log(sigma_bounds[1])])
    x = np.empty((k, 2))
    x[:, 0] = mu0
    x[:, 1] = np.log(np.asarray(sigma0, dtype=float))
    x = np.clip(x, lo, hi)

    def evaluate(idx, xs):
        sig = np.exp(xs[:, 1])
        f, g_mu, g_sig = objective(idx, xs[:, 0], sig)
        # gradient in (mu, log sigma) and in (mu, sigma)
        g = np.column_stack([g_mu, g_sig * sig])
        g_orig = np.column_stack([g_mu, g_sig])
        return np.asarray(f, dtype=float), g, g_orig

    all_idx = np.arange(k)
    f, g, g_orig = evaluate(all_idx, x)
    f_init = f.copy()
    B = np.zeros((k, 2, 2))
    fresh = np.ones(k, dtype=bool)
    iters = np.zeros(k, dtype=np.int64)
    done = np.zeros(k, dtype=bool)
    converged = np.zeros(k, dtype=bool)

    def pg_norm(rows):
        pg = _projected(x[rows], g_orig[rows], lo, hi)
        return np.sqrt((pg * pg).sum(axis=1))

    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        small = pg_norm(act) <= tol
        converged[act[small]] = True
        done[act[small]] = True
        act = act[~small]
        if act.size == 0:
            break
        iters[act] += 1

        xa, ga = x[act], g[act]
        free = ~(((xa <= lo) & (ga < 0)) | ((xa >= hi) & (ga > 0)))
        ga_free = np.where(free, ga, 0.0)

        # initial curvature guess: unit-length first step
        new = fresh[act]
        if np.any(new):
            scale = np.maximum(np.abs(ga_free[new]).max(axis=1), 1e-12)
            B[act[new]] = scale[:, None, None] * np.eye(2)
        Ba = B[act]
        d = _solve_free(Ba, ga_free, free)
        slope = (ga_free * d).sum(axis=1)
        bad = ~(slope > 0) | ~np.all(np.isfinite(d), axis=1)
        if np.any(bad):
            scale = np.maximum(np.abs(ga_free[bad]).max(axis=1), 1e-12)
            B[act[bad]] = scale[:, None, None] * np.eye(2)
            fresh[act[bad]] = True
            d[bad] = ga_free[bad] / scale[:, None]
        step = np.abs(d).max(axis=1)
        d *= np.minimum(1.0, _MAX_STEP / np.maximum(step, 1e-300))[:, None]

        t = np.ones(act.size)
        accepted = np.zeros(act.size, dtype=bool)
        x_new = xa.copy()
        f_new = f[act].copy()
        g_new = ga.copy()
        go_new = g_orig[act].copy()
        pending = np.arange(act.size)
        for _h in range(_MAX_HALVINGS):
            if pending.size == 0:
                break
            xt = np.clip(xa[pending] + t[pending, None] * d[pending], lo, hi)
            ft, gt, got = evaluate(act[pending], xt)
            f0 = f[act[pending]]
            gain = (ga[pending] * (xt - xa[pending])).sum(axis=1)
            noise = _NOISE * (1.0 + np.abs(f0))
            ok = np.isfinite(ft) & (
                (ft >= f0 + _ARMIJO * gain)
                | ((gain <= noise) & (ft >= f0 - noise)))
            hit = pending[ok]
            x_new[hit], f_new[hit], g_new[hit], go_new[hit] = xt[ok], ft[ok], gt[ok], got[ok]
            accepted[hit] = True
            pending = pending[~ok]
            t[pending] *= 0.5

        stalled = act[~accepted]
        if stalled.size:
            done[stalled] = True
            converged[stalled] = pg_norm(stalled) <= tol

        acc = np.flatnonzero(accepted)
        rows = act[acc]
        s = x_new[acc] - xa[acc]
        y = ga[acc] - g_new[acc]
        x[rows], f[rows], g[rows], g_orig[rows] = x_new[acc], f_new[acc], g_new[acc], go_new[acc]
        _bfgs_update(B, rows, s, y, fresh)

    # final classification of those that ran out of iterations
    rest = np.flatnonzero(~done)
    if rest.size:
        converged[rest] = pg_norm(rest) <= tol
    return BatchResult(mu=x[:, 0].copy(), sigma=np.exp(x[:, 1]), value=f,
                       grad_norm=pg_norm(all_idx), iterations=iters,
                       converged=converged, initial_value=f_init)


def _solve_free(B, g, free):
    """Solve ``B d = g`` restricted to the free coordinates of each row."""
    d = np.zeros_like(g)
    both = free.all(axis=1)
    if np.any(both):
        a, b, c = B[both, 0, 0], B[both, 0, 1], B[both, 1, 1]
        det = a * c - b * b
        gb = g[both]
        with np.errstate(divide="ignore", invalid="ignore"):
            d[both, 0] = (c * gb[:, 0] - b * gb[:, 1]) / det
            d[both, 1] = (a * gb[:, 1] - b * gb[:, 0]) / det
    for j in (0, 1):
        only = free[:, j] & ~both
        if np.any(only):
            d[only, j] = g[only, j] / B[only, j, j]
    return d


def _bfgs_update(B, rows, s, y, fresh):
    sy = (s * y).sum(axis=1)
    ss = (s * s).sum(axis=1)
    yy = (y * y).sum(axis=1)
    ok = sy > 1e-12 * np.sqrt(ss * yy)
    if not np.any(ok):
        return
    r = rows[ok]
    s, y, sy, yy = s[ok], y[ok], sy[ok], yy[ok]
    first = fresh[r]
    Br = B[r]
    if np.any(first):
        Br[first] = (yy[first] / sy[first])[:, None, None] * np.eye(2)
    Bs = np.einsum("kij,kj->ki", Br, s)
    sBs = (s * Bs).sum(axis=1)
    Br = Br - np.einsum("ki,kj->kij", Bs, Bs) / sBs[:, None, None] \
        + np.einsum("ki,kj->kij", y, y) / sy[:, None, None]
    B[r] = Br
    fresh[r] = False
