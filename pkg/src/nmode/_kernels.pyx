# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_kernels_py``; same signatures and results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, fmax, fmin

cnp.import_array()

ctypedef cnp.intp_t intp


cdef double[7] _C = [0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0]
cdef double[7][6] _A = [
    [0, 0, 0, 0, 0, 0],
    [1.0 / 5, 0, 0, 0, 0, 0],
    [3.0 / 40, 9.0 / 40, 0, 0, 0, 0],
    [44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0],
    [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0],
    [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0],
    [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84],
]
cdef double[7] _E = [
    35.0 / 384 - 5179.0 / 57600,
    0.0,
    500.0 / 1113 - 7571.0 / 16695,
    125.0 / 192 - 393.0 / 640,
    -2187.0 / 6784 + 92097.0 / 339200,
    11.0 / 84 - 187.0 / 2100,
    -1.0 / 40,
]


cdef inline double ipow(double x, int n) nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(n):
        r *= x
    return r


def residual_positive(const double[::1] q, const intp[::1] indptr, const intp[::1] indices,
                      double eta, double omega, int sigma):
    cdef Py_ssize_t n = q.shape[0], j, p
    cdef double s
    out = np.empty(n)
    cdef double[::1] f = out
    for j in range(n):
        s = 0.0
        for p in range(indptr[j], indptr[j + 1]):
            s += sqrt(q[indices[p]])
        f[j] = -s / sqrt(q[j]) + eta * ipow(q[j], sigma) - omega
    return out


def jacobian_positive(const double[::1] q, const intp[::1] indptr, const intp[::1] indices,
                      double eta, int sigma):
    cdef Py_ssize_t n = q.shape[0], j, p, l
    cdef double s, sj
    out = np.zeros((n + 1, n + 1))
    cdef double[:, ::1] J = out
    for j in range(n):
        sj = sqrt(q[j])
        s = 0.0
        for p in range(indptr[j], indptr[j + 1]):
            l = indices[p]
            s += sqrt(q[l])
            J[j, l] = -0.5 / (sj * sqrt(q[l]))
        J[j, j] = 0.5 * s / (q[j] * sj) + eta * sigma * ipow(q[j], sigma - 1)
        J[j, n] = -1.0
        J[n, j] = 1.0
    return out


cdef void _rhs(const double* y, double* out, Py_ssize_t n, const intp* indptr, const intp* indices,
               const double* data, double epsc, int sigma, double hbar) nogil:
    cdef Py_ssize_t j, p
    cdef double tx, tv, g, x, v
    for j in range(n):
        tx = 0.0
        tv = 0.0
        for p in range(indptr[j], indptr[j + 1]):
            tx += data[p] * y[indices[p]]
            tv += data[p] * y[n + indices[p]]
        x = y[j]
        v = y[n + j]
        g = epsc * ipow(x * x + v * v, sigma)
        out[j] = (tv + g * v) / hbar
        out[n + j] = -(tx + g * x) / hbar


def nmode_rhs(const double[::1] y, const intp[::1] indptr, const intp[::1] indices,
              const double[::1] data, double epsc, int sigma, double hbar):
    cdef Py_ssize_t n = y.shape[0] // 2
    out = np.empty(2 * n)
    cdef double[::1] o = out
    _rhs(&y[0], &o[0], n, &indptr[0], &indices[0], &data[0], epsc, sigma, hbar)
    return out


def dopri5(const double[::1] y0, const intp[::1] indptr, const intp[::1] indices,
           const double[::1] data, double epsc, int sigma, double hbar,
           const double[::1] t_eval, double h0, double rtol, double atol,
           long max_steps, double h_min):
    cdef Py_ssize_t m = t_eval.shape[0], dim = y0.shape[0], n = dim // 2
    cdef Py_ssize_t i, s, r, c
    Yarr = np.full((m, dim), np.nan)
    cdef double[:, ::1] Y = Yarr
    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef double[::1] acc = np.empty(dim)
    cdef double[:, ::1] k = np.empty((7, dim))
    cdef double[::1] f = np.empty(dim)
    cdef double t = t_eval[0], h = h0, step, target, err, e, sc, fac
    cdef long n_acc = 0, n_rej = 0
    for c in range(dim):
        Y[0, c] = y0[c]
    _rhs(&y[0], &f[0], n, &indptr[0], &indices[0], &data[0], epsc, sigma, hbar)
    with nogil:
        for i in range(1, m):
            target = t_eval[i]
            while t < target:
                if n_acc + n_rej >= max_steps:
                    with gil:
                        return Yarr, n_acc, n_rej, 1
                if h < h_min:
                    with gil:
                        return Yarr, n_acc, n_rej, 2
                step = fmin(h, target - t)
                for c in range(dim):
                    k[0, c] = f[c]
                for s in range(1, 7):
                    for c in range(dim):
                        acc[c] = y[c]
                    for r in range(s):
                        if _A[s][r] != 0.0:
                            for c in range(dim):
                                acc[c] += step * _A[s][r] * k[r, c]
                    _rhs(&acc[0], &k[s, 0], n, &indptr[0], &indices[0], &data[0], epsc, sigma, hbar)
                err = 0.0
                for c in range(dim):
                    e = 0.0
                    for r in range(7):
                        e += _E[r] * k[r, c]
                    e *= step
                    sc = atol + rtol * fmax(fabs(y[c]), fabs(acc[c]))
                    err += (e / sc) * (e / sc)
                err = sqrt(err / dim)
                if err <= 1.0:
                    if step == target - t:
                        t = target
                    else:
                        t = t + step
                    for c in range(dim):
                        y[c] = acc[c]
                        f[c] = k[6, c]
                    n_acc += 1
                    if err == 0.0:
                        fac = 5.0
                    else:
                        fac = fmin(5.0, fmax(0.2, 0.9 * pow(err, -0.2)))
                    if step < h:
                        h = fmax(h, step * fac)
                    else:
                        h = step * fac
                else:
                    n_rej += 1
                    h = step * fmax(0.2, 0.9 * pow(err, -0.2))
            for c in range(dim):
                Y[i, c] = y[c]
    return Yarr, n_acc, n_rej, 0
