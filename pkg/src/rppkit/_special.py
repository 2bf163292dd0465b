"""Scalar/array special functions used throughout the package.

The normal CDF goes through ``erfc`` so that both tails keep full relative
precision.  The inverse CDF and the digamma/trigamma functions are written
out here rather than pulled from scipy so their accuracy envelope is known
and stable across scipy releases; the test suite checks them against scipy.
"""
import math

import numpy as np
from scipy.special import erfc, gammaln

__all__ = [
    "LOG_SQRT_2PI",
    "norm_cdf",
    "norm_sf",
    "norm_pdf",
    "norm_ppf",
    "digamma",
    "trigamma",
    "gammaln",
]

SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def norm_cdf(x):
    """Standard normal CDF, ``0.5 * erfc(-x / sqrt(2))``."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / SQRT2)


def norm_sf(x):
    """Standard normal survival function ``1 - Phi(x)`` without cancellation."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / SQRT2)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


# Acklam's rational approximation, relative error ~1.15e-9 before polishing.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _tail(q):
    r = np.sqrt(-2.0 * np.log(q))
    num = ((((_C[0] * r + _C[1]) * r + _C[2]) * r + _C[3]) * r + _C[4]) * r + _C[5]
    den = (((_D[0] * r + _D[1]) * r + _D[2]) * r + _D[3]) * r + 1.0
    return num / den


def _central(p):
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return num / den


def norm_ppf(p):
    """Inverse standard normal CDF.

    Rational approximation followed by one Newton step.  The residual of the
    Newton step is taken against the survival function in the upper half so
    that ``1 - p`` (exact there) is never rounded away.
    """
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    x = np.full(p.shape, np.nan)
    x[p == 0.0] = -np.inf
    x[p == 1.0] = np.inf

    lo = (p > 0.0) & (p < _P_LOW)
    hi = (p > 1.0 - _P_LOW) & (p < 1.0)
    mid = (p >= _P_LOW) & (p <= 1.0 - _P_LOW)
    with np.errstate(divide="ignore", invalid="ignore"):
        x[lo] = _tail(p[lo])
        x[hi] = -_tail(1.0 - p[hi])
        x[mid] = _central(p[mid])

    ok = lo | hi | mid
    xo = x[ok]
    po = p[ok]
    upper = po > 0.5
    resid = np.where(upper, (1.0 - po) - norm_sf(xo), norm_cdf(xo) - po)
    xo = xo - resid / norm_pdf(xo)
    x[ok] = xo
    return x[0] if scalar else x


_DIGAMMA_SHIFT = 10.0


def digamma(x):
    """Digamma for positive arguments via upward recurrence + Stirling series."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    if np.any(~(x > 0)):
        raise ValueError("digamma is only defined here for x > 0")
    acc = np.zeros_like(x)
    small = x < _DIGAMMA_SHIFT
    while np.any(small):
        acc[small] -= 1.0 / x[small]
        x[small] += 1.0
        small = x < _DIGAMMA_SHIFT
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12.0))))))
    out = acc + np.log(x) - 0.5 * inv - series
    return out[0] if scalar else out


def trigamma(x):
    """Trigamma for positive arguments via recurrence + asymptotic series."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).copy()
    if np.any(~(x > 0)):
        raise ValueError("trigamma is only defined here for x > 0")
    acc = np.zeros_like(x)
    small = x < _DIGAMMA_SHIFT
    while np.any(small):
        acc[small] += 1.0 / (x[small] * x[small])
        x[small] += 1.0
        small = x < _DIGAMMA_SHIFT
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv * (1.0 + inv * (0.5 + inv * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (
        1.0 / 42 - inv2 * (1.0 / 30 - inv2 * 5.0 / 66))))))
    out = acc + series
    return out[0] if scalar else out
