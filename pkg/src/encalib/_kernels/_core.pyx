# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels: row-wise softmax/logsumexp and the fused
instance-wise MSE loss used by the temperature-parameter grid search.

Single-threaded by design; fit results must not depend on scheduling.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, fmax

cnp.import_array()


def logsumexp_rows(double[:, ::1] Z):
    cdef Py_ssize_t n = Z.shape[0], k = Z.shape[1], i, j
    cdef double m, s
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        m = Z[i, 0]
        for j in range(1, k):
            if Z[i, j] > m:
                m = Z[i, j]
        s = 0.0
        for j in range(k):
            s += exp(Z[i, j] - m)
        out[i] = m + log(s)
    return out_arr


def softmax_rows(double[:, ::1] Z, double t):
    cdef Py_ssize_t n = Z.shape[0], k = Z.shape[1], i, j
    cdef double m, s
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        m = Z[i, 0] / t
        for j in range(1, k):
            if Z[i, j] / t > m:
                m = Z[i, j] / t
        s = 0.0
        for j in range(k):
            out[i, j] = exp(Z[i, j] / t - m)
            s += out[i, j]
        for j in range(k):
            out[i, j] /= s
    return out_arr


def softmax_rows_t(double[:, ::1] Z, double[::1] T):
    cdef Py_ssize_t n = Z.shape[0], k = Z.shape[1], i, j
    cdef double m, s, t
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        t = T[i]
        m = Z[i, 0] / t
        for j in range(1, k):
            if Z[i, j] / t > m:
                m = Z[i, j] / t
        s = 0.0
        for j in range(k):
            out[i, j] = exp(Z[i, j] / t - m)
            s += out[i, j]
        for j in range(k):
            out[i, j] /= s
    return out_arr


cdef double _mse_loss(double[:, ::1] Z, long[::1] labels,
                      double[::1] lam1, double[::1] lam2,
                      double t_ts, double t_min,
                      double th1, double th2) noexcept nogil:
    cdef Py_ssize_t n = Z.shape[0], k = Z.shape[1], i, j
    cdef double total = 0.0, t, m, s, s2, e, ey, inv, per
    cdef long y
    for i in range(n):
        t = fmax(t_min, t_ts - lam1[i] * th1 + lam2[i] * th2)
        m = Z[i, 0] / t
        for j in range(1, k):
            if Z[i, j] / t > m:
                m = Z[i, j] / t
        s = 0.0
        s2 = 0.0
        ey = 0.0
        y = labels[i]
        for j in range(k):
            e = exp(Z[i, j] / t - m)
            s += e
            s2 += e * e
            if j == y:
                ey = e
        inv = 1.0 / s
        # squared L2 against one-hot(y):   sum(p^2) - 2*p_y + 1
        # squared L2 against uniform 1/k:  sum(p^2) - 1/k
        if y >= 0:
            per = s2 * inv * inv - 2.0 * ey * inv + 1.0
        else:
            per = s2 * inv * inv - 1.0 / k
        total += per
    return total / n


def mse_loss(double[:, ::1] Z, long[::1] labels, double[::1] lam1,
             double[::1] lam2, double t_ts, double t_min,
             double th1, double th2):
    return _mse_loss(Z, labels, lam1, lam2, t_ts, t_min, th1, th2)


def mse_loss_grid(double[:, ::1] Z, long[::1] labels, double[::1] lam1,
                  double[::1] lam2, double t_ts, double t_min,
                  double[::1] th1s, double[::1] th2s):
    cdef Py_ssize_t n1 = th1s.shape[0], n2 = th2s.shape[0], i, j
    out_arr = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(n1):
        for j in range(n2):
            out[i, j] = _mse_loss(Z, labels, lam1, lam2, t_ts, t_min,
                                  th1s[i], th2s[j])
    return out_arr
