# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-item likelihood reductions (same contract as ``_kernels_py``)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, exp, log

cnp.import_array()

DEF LOG_SQRT_2PI = 0.9189385332046727
DEF INV_SQRT2 = 0.7071067811865476
DEF INV_SQRT_2PI = 0.3989422804014327

NSTATS = 7


def item_stats(const double[::1] log_t, const cnp.int64_t[::1] offsets,
               const double[::1] log_T, mu, sigma, double m, items):
    cdef const cnp.int64_t[::1] it = np.ascontiguousarray(items, dtype=np.int64)
    cdef const double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] sg_v = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef Py_ssize_t k = it.shape[0]
    out_arr = np.zeros((NSTATS, k))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t j, i, d
    cdef double mu_j, s, inv_s, tau_T, F_T, S_T, phi_T, n, w
    cdef double tau, phi, gap, lt, log_s
    cdef double sum_logf, sum_gap, sum_phi, sum_tau, sum_tau2, sum_tauphi
    for j in range(k):
        d = it[j]
        mu_j = mu_v[j]
        s = sg_v[j]
        inv_s = 1.0 / s
        log_s = log(s)
        tau_T = (log_T[d] - mu_j) / s
        F_T = 0.5 * erfc(-tau_T * INV_SQRT2)
        S_T = 0.5 * erfc(tau_T * INV_SQRT2)
        phi_T = exp(-0.5 * tau_T * tau_T) * INV_SQRT_2PI
        sum_logf = 0.0
        sum_gap = 0.0
        sum_phi = 0.0
        sum_tau = 0.0
        sum_tau2 = 0.0
        sum_tauphi = 0.0
        for i in range(offsets[d], offsets[d + 1]):
            lt = log_t[i]
            tau = (lt - mu_j) / s
            phi = exp(-0.5 * tau * tau) * INV_SQRT_2PI
            if tau >= 0.0:
                gap = 0.5 * erfc(tau * INV_SQRT2) - S_T
            else:
                gap = F_T - 0.5 * erfc(-tau * INV_SQRT2)
            sum_logf += -LOG_SQRT_2PI - log_s - lt - 0.5 * tau * tau
            sum_gap += gap
            sum_phi += phi
            sum_tau += tau
            sum_tau2 += tau * tau
            sum_tauphi += tau * phi
        n = <double>(offsets[d + 1] - offsets[d])
        w = m + n
        out[0, j] = sum_logf
        out[1, j] = m * F_T + sum_gap
        out[2, j] = -(w * phi_T - sum_phi) * inv_s
        out[3, j] = -(w * tau_T * phi_T - sum_tauphi) * inv_s
        out[4, j] = sum_tau * inv_s
        out[5, j] = (sum_tau2 - n) * inv_s
        out[6, j] = F_T
    return out_arr
