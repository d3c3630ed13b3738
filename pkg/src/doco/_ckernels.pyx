# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation loop; mirrors ``_kernels_py.simulate`` step for step."""

import numpy as np
from libc.math cimport sqrt, isfinite


cdef void _grad(const double[:, :, :] C, const double[:, :] y,
                const double[:, :] X, double[:, :] out) noexcept nogil:
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], d = C.shape[2]
    cdef Py_ssize_t i, k, j
    cdef double r
    for i in range(n):
        for j in range(d):
            out[i, j] = 0.0
        for k in range(m):
            r = -y[i, k]
            for j in range(d):
                r += C[i, k, j] * X[i, j]
            for j in range(d):
                out[i, j] += C[i, k, j] * r


cdef void _mix(const double[:, :] W, const double[:, :] X,
               double[:, :] out) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double w
    for i in range(n):
        for k in range(d):
            out[i, k] = 0.0
        for j in range(n):
            w = W[i, j]
            if w != 0.0:
                for k in range(d):
                    out[i, k] += w * X[j, k]


cdef void _predict(const double[:, :] A, const double[:, :] X,
                   double[:, :] out) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(n):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += A[j, k] * X[i, k]
            out[i, j] = s


def simulate(const double[:, :, :, :] rows, const double[:, :, :] meas,
             const double[:, :] W, const double[:, :] A, const double[:, :] x0,
             double alpha, bint odg, Py_ssize_t T, double threshold):
    cdef Py_ssize_t n = x0.shape[0], d = x0.shape[1]
    cdef bint varying = rows.shape[0] > 1
    xs_arr = np.zeros((T + 1, n, d))
    ys_arr = np.zeros((T + 1, n, d))
    cdef double[:, :, :] xs = xs_arr
    cdef double[:, :, :] ys = ys_arr
    cdef double[:, :] X = np.array(x0, dtype=np.float64)
    cdef double[:, :] Y = np.zeros((n, d))
    cdef double[:, :] G = np.zeros((n, d))
    cdef double[:, :] Gn = np.zeros((n, d))
    cdef double[:, :] tmp = np.zeros((n, d))
    cdef double[:, :] mixed = np.zeros((n, d))
    cdef Py_ssize_t t, i, k, ri
    cdef double norm2
    cdef bint bad = False

    with nogil:
        _grad(rows[0], meas[0], X, G)
        for i in range(n):
            for k in range(d):
                if not odg:
                    Y[i, k] = alpha * G[i, k]
                xs[0, i, k] = X[i, k]
                ys[0, i, k] = Y[i, k]
        for t in range(T):
            if odg:
                _mix(W, X, mixed)
                for i in range(n):
                    for k in range(d):
                        mixed[i, k] = mixed[i, k] - alpha * G[i, k]
            else:
                for i in range(n):
                    for k in range(d):
                        tmp[i, k] = X[i, k] - Y[i, k]
                _mix(W, tmp, mixed)
            _predict(A, mixed, X)
            ri = t + 1 if varying else 0
            _grad(rows[ri], meas[t + 1], X, Gn)
            if not odg:
                _mix(W, Y, tmp)
                for i in range(n):
                    for k in range(d):
                        Y[i, k] = tmp[i, k] + alpha * (Gn[i, k] - G[i, k])
            norm2 = 0.0
            for i in range(n):
                for k in range(d):
                    G[i, k] = Gn[i, k]
                    xs[t + 1, i, k] = X[i, k]
                    ys[t + 1, i, k] = Y[i, k]
                    norm2 += X[i, k] * X[i, k]
            if not (isfinite(norm2) and sqrt(norm2) <= threshold):
                bad = True
                break
    if bad:
        return xs_arr[: t + 2], ys_arr[: t + 2], t + 1, True
    return xs_arr, ys_arr, T, False
