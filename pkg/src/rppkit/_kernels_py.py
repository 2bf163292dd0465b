"""NumPy implementation of the per-item likelihood reductions.

Shares its signature with the compiled ``_kernels`` module; see
``rppkit._backend`` for selection.
"""
import numpy as np
from scipy.special import erfc

from ._special import LOG_SQRT_2PI

NSTATS = 7
SUM_LOGF, EXPOSURE, DX_DMU, DX_DSIGMA, DLOGF_DMU, DLOGF_DSIGMA, CDF_T = range(NSTATS)

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def _ranges(starts, lengths):
    total = int(lengths.sum())
    owner = np.repeat(np.arange(lengths.size), lengths)
    first = np.repeat(starts - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
    return np.arange(total, dtype=np.int64) + first, owner


def item_stats(log_t, offsets, log_T, mu, sigma, m, items):
    """Sufficient statistics of the log-likelihood for the items in ``items``.

    ``mu`` and ``sigma`` are aligned with ``items``; ``log_T`` and ``offsets``
    are indexed by item.  Returns an array of shape ``(NSTATS, len(items))``.
    """
    items = np.asarray(items, dtype=np.int64)
    k = items.size
    out = np.zeros((NSTATS, k))
    if k == 0:
        return out
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    starts = offsets[items]
    lengths = offsets[items + 1] - starts
    n = lengths.astype(float)

    tau_T = (log_T[items] - mu) / sigma
    F_T = 0.5 * erfc(-tau_T * _INV_SQRT2)
    S_T = 0.5 * erfc(tau_T * _INV_SQRT2)
    phi_T = np.exp(-0.5 * tau_T * tau_T) * _INV_SQRT_2PI

    sum_logf = np.zeros(k)
    sum_gap = np.zeros(k)
    sum_phi = np.zeros(k)
    sum_tau = np.zeros(k)
    sum_tau2 = np.zeros(k)
    sum_tauphi = np.zeros(k)
    if int(lengths.sum()):
        idx, owner = _ranges(starts, lengths)
        lt = log_t[idx]
        s = sigma[owner]
        tau = (lt - mu[owner]) / s
        phi = np.exp(-0.5 * tau * tau) * _INV_SQRT_2PI
        # F(T) - F(t_i), from whichever tail keeps precision
        gap = np.where(tau >= 0.0,
                       0.5 * erfc(tau * _INV_SQRT2) - S_T[owner],
                       F_T[owner] - 0.5 * erfc(-tau * _INV_SQRT2))
        logf = -LOG_SQRT_2PI - np.log(s) - lt - 0.5 * tau * tau
        sum_logf = np.bincount(owner, logf, minlength=k)
        sum_gap = np.bincount(owner, gap, minlength=k)
        sum_phi = np.bincount(owner, phi, minlength=k)
        sum_tau = np.bincount(owner, tau, minlength=k)
        sum_tau2 = np.bincount(owner, tau * tau, minlength=k)
        sum_tauphi = np.bincount(owner, tau * phi, minlength=k)

    w = m + n
    out[SUM_LOGF] = sum_logf
    out[EXPOSURE] = m * F_T + sum_gap
    out[DX_DMU] = -(w * phi_T - sum_phi) / sigma
    out[DX_DSIGMA] = -(w * tau_T * phi_T - sum_tauphi) / sigma
    out[DLOGF_DMU] = sum_tau / sigma
    out[DLOGF_DSIGMA] = (sum_tau2 - n) / sigma
    out[CDF_T] = F_T
    return out
