# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see _pykernels for the reference semantics."""

import numpy as np

from libc.math cimport exp, sqrt
from libc.stdlib cimport free, malloc

cdef enum:
    GAUSSIAN = 0
    POISSON = 1
    BINOMIAL = 2

cdef double LOGIT_EPS = 2.0 ** -52
cdef double LOG_MAX = 709.782712893384


def standardize(const double[:, :, ::1] X, const double[:, ::1] y,
                const double[::1] beta, int family):
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1], p = X.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double eta, mu, dmu, nu, sd
    cdef int status = 0
    cdef Py_ssize_t bad = -1

    scale_arr = np.empty((m, n))
    resid_arr = np.empty((m, n))
    sd_arr = np.empty((m, n))
    cdef double[:, ::1] scale = scale_arr
    cdef double[:, ::1] resid = resid_arr
    cdef double[:, ::1] sdv = sd_arr
    cdef const double *x
    cdef const double *b = &beta[0]

    with nogil:
        for i in range(m):
            for j in range(n):
                x = &X[i, j, 0]
                eta = 0.0
                for k in range(p):
                    eta = eta + x[k] * b[k]
                if family == GAUSSIAN:
                    mu = eta
                    dmu = 1.0
                    nu = 1.0
                elif family == POISSON:
                    if eta > LOG_MAX:
                        status = 1
                        bad = i * n + j
                        break
                    mu = exp(eta)
                    dmu = mu
                    nu = mu
                else:
                    mu = 1.0 / (1.0 + exp(-eta))
                    if mu < LOGIT_EPS:
                        mu = LOGIT_EPS
                    elif mu > 1.0 - LOGIT_EPS:
                        mu = 1.0 - LOGIT_EPS
                    dmu = mu * (1.0 - mu)
                    nu = dmu
                if not nu > 0.0:
                    status = 2
                    bad = i * n + j
                    break
                sd = sqrt(nu)
                sdv[i, j] = sd
                scale[i, j] = dmu / sd
                resid[i, j] = (y[i, j] - mu) / sd
            if status:
                break
    return scale_arr, resid_arr, sd_arr, status, bad


def accumulate(const double[:, :, ::1] X, const double[:, ::1] scale,
               const double[:, ::1] resid, const double[:, ::1] Rinv,
               const double[::1] weights, bint want_vectors=False, bint want_info=True):
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1], p = X.shape[2]
    cdef Py_ssize_t i, j, k, l
    cdef double w, s, a

    score = np.zeros(p)
    info = np.zeros((p, p))
    vectors = np.empty((m if want_vectors else 0, p))
    cdef double[::1] sc = score
    cdef double[:, ::1] H = info
    cdef double[:, ::1] V = vectors
    cdef double *t = <double *> malloc(n * p * sizeof(double))
    cdef double *g = <double *> malloc(n * p * sizeof(double))
    cdef double *v = <double *> malloc(p * sizeof(double))
    cdef double *h = <double *> malloc(p * p * sizeof(double))
    cdef const double *x
    cdef const double *R = &Rinv[0, 0]
    if t == NULL or g == NULL or v == NULL or h == NULL:
        free(t); free(g); free(v); free(h)
        raise MemoryError()

    with nogil:
        for k in range(p * p):
            h[k] = 0.0
        for i in range(m):
            w = weights[i]
            x = &X[i, 0, 0]
            # t = diag(scale_i) X_i
            for j in range(n):
                s = scale[i, j]
                for k in range(p):
                    t[j * p + k] = s * x[j * p + k]
            # g = Rinv t
            for j in range(n * p):
                g[j] = 0.0
            for j in range(n):
                for l in range(n):
                    a = R[j * n + l]
                    if a != 0.0:
                        for k in range(p):
                            g[j * p + k] += a * t[l * p + k]
            # v = g' r
            for k in range(p):
                v[k] = 0.0
            for j in range(n):
                a = resid[i, j]
                for k in range(p):
                    v[k] += a * g[j * p + k]
            for k in range(p):
                sc[k] += w * v[k]
            if want_vectors:
                for k in range(p):
                    V[i, k] = v[k]
            if not want_info:
                continue
            # h += w t' g, upper triangle
            for j in range(n):
                for k in range(p):
                    a = w * t[j * p + k]
                    for l in range(k, p):
                        h[k * p + l] += a * g[j * p + l]
        for k in range(p):
            for l in range(k, p):
                H[k, l] = h[k * p + l]
                H[l, k] = h[k * p + l]
    free(t); free(g); free(v); free(h)
    return score, (info if want_info else None), (vectors if want_vectors else None)


def alias_table(const double[::1] pi):
    cdef Py_ssize_t m = pi.shape[0]
    cdef Py_ssize_t i, lo, hi, ns = 0, nl = 0
    cdef double dm = <double>m

    prob_arr = np.ones(m)
    alias_arr = np.arange(m, dtype=np.intp)
    ps_arr = np.empty(m)
    small_arr = np.empty(m, dtype=np.intp)
    large_arr = np.empty(m, dtype=np.intp)
    cdef double[::1] prob = prob_arr
    cdef Py_ssize_t[::1] alias = alias_arr
    cdef double[::1] ps = ps_arr
    cdef Py_ssize_t[::1] small = small_arr
    cdef Py_ssize_t[::1] large = large_arr

    with nogil:
        for i in range(m):
            ps[i] = pi[i] * dm
            if ps[i] < 1.0:
                small[ns] = i
                ns += 1
            else:
                large[nl] = i
                nl += 1
        while ns > 0 and nl > 0:
            ns -= 1
            lo = small[ns]
            nl -= 1
            hi = large[nl]
            prob[lo] = ps[lo]
            alias[lo] = hi
            ps[hi] = (ps[hi] + ps[lo]) - 1.0
            if ps[hi] < 1.0:
                small[ns] = hi
                ns += 1
            else:
                large[nl] = hi
                nl += 1
    return prob_arr, alias_arr
