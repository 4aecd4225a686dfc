# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback.py`` (same semantics)."""

from libc.math cimport exp, log, log1p, expm1, sqrt, fabs, INFINITY
from scipy.special.cython_special cimport log_ndtr, ndtri, ndtri_exp

import numpy as np

NAME = "cython"

DEF AUX = 1
DEF LAPLACE = 2
DEF NEWTON_TOL = 1e-10
DEF NEWTON_MAXITER = 100


cdef inline double _log_expm1(double x) noexcept nogil:
    if x > 50.0:
        return x + log1p(-exp(-x))
    return log(expm1(x))


cdef inline double _logaddexp(double a, double b) noexcept nogil:
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef inline double _softplus(double y) noexcept nogil:
    if y > 0:
        return y + log1p(exp(-y))
    return log1p(exp(y))


cdef inline double _sig(double y) noexcept nogil:
    cdef double e
    if y >= 0:
        e = exp(-y)
        return 1.0 / (1.0 + e)
    e = exp(y)
    return e / (1.0 + e)


cdef inline double _log_target(double eta, double prec, double m, double n,
                               double N, double log_c) noexcept nogil:
    return -0.5 * prec * (eta - m) * (eta - m) + n * eta - N * _softplus(eta - log_c)


cdef double _log_others(double[:, :, ::1] x, Py_ssize_t t, Py_ssize_t r,
                        Py_ssize_t c, Py_ssize_t C) noexcept nogil:
    cdef double m = -INFINITY, s = 0.0
    cdef Py_ssize_t j
    for j in range(C):
        if j != c and x[t, r, j] > m:
            m = x[t, r, j]
    for j in range(C):
        if j != c:
            s += exp(x[t, r, j] - m)
    return m + log(s)


cdef double _mode(double prec, double m, double n, double N, double log_c,
                  double start, double* curv) noexcept nogil:
    cdef double lo = m + (n - N) / prec, hi = m + n / prec
    cdef double eta = start, s, grad, new
    cdef int it
    if eta < lo:
        eta = lo
    if eta > hi:
        eta = hi
    for it in range(NEWTON_MAXITER):
        s = _sig(eta - log_c)
        grad = -prec * (eta - m) + n - N * s
        if grad > 0:
            lo = eta
        else:
            hi = eta
        new = eta + grad / (prec + N * s * (1.0 - s))
        if new <= lo or new >= hi:
            new = 0.5 * (lo + hi)
        if fabs(new - eta) <= NEWTON_TOL * (1.0 + fabs(eta)):
            eta = new
            break
        eta = new
    s = _sig(eta - log_c)
    curv[0] = prec + N * s * (1.0 - s)
    return eta


def ln_sweep(double[:, :, ::1] params, double[:, :, ::1] counts, double precision,
             double sigma0, double[:, :, :, ::1] uniforms, int scheme=AUX | LAPLACE):
    cdef Py_ssize_t T = params.shape[0], R = params.shape[1], C = params.shape[2]
    cdef Py_ssize_t parity, c, t, r, j
    cdef double kappa = precision, prec, num, m, mean, sd, eta, log_c, n, n_tot, s, bound, beta
    cdef double cval, mode, curv, tau, prop, log_w_new, log_w_old, old
    cdef long accepted = 0
    cdef bint any_obs
    cdef double[:, ::1] tot = np.ascontiguousarray(np.asarray(counts).sum(axis=2))
    # running per-row sums of exp(x - shift): the softmax denominator in O(1)
    cdef double[:, ::1] shift = np.empty((T, R))
    cdef double[:, ::1] rsum = np.empty((T, R))
    cdef double[:, :, ::1] x = params

    with nogil:
        for parity in range(2):
            any_obs = False
            for t in range(parity, T, 2):
                for r in range(R):
                    if tot[t, r] > 0:
                        any_obs = True
                    shift[t, r] = -INFINITY
                    for j in range(C):
                        if x[t, r, j] > shift[t, r]:
                            shift[t, r] = x[t, r, j]
                    rsum[t, r] = 0.0
                    for j in range(C):
                        rsum[t, r] += exp(x[t, r, j] - shift[t, r])
            for c in range(C):
                for t in range(parity, T, 2):
                    prec = (1.0 / (sigma0 * sigma0) if t == 0 else kappa) + (kappa if t < T - 1 else 0.0)
                    sd = 1.0 / sqrt(prec)
                    for r in range(R):
                        num = 0.0
                        if t > 0:
                            num += kappa * x[t - 1, r, c]
                        if t < T - 1:
                            num += kappa * x[t + 1, r, c]
                        m = num / prec
                        n = counts[t, r, c]
                        n_tot = tot[t, r]
                        eta = x[t, r, c]
                        if C == 1 or not any_obs:
                            x[t, r, c] = m + sd * ndtri(uniforms[t, r, c, 2])
                            continue
                        cval = rsum[t, r] - exp(eta - shift[t, r])
                        if cval < 1e-8 * rsum[t, r]:
                            log_c = _log_others(x, t, r, c, C)
                        else:
                            log_c = shift[t, r] + log(cval)
                        old = eta
                        if scheme & AUX:
                            mean = m + n / prec
                            if n_tot > 0:
                                s = (_logaddexp(eta, log_c) - log_c) - log(uniforms[t, r, c, 0]) / n_tot
                                bound = log_c + _log_expm1(s)
                            else:
                                bound = INFINITY
                            beta = (bound - mean) / sd
                            eta = mean + sd * ndtri_exp(log(uniforms[t, r, c, 1]) + log_ndtr(beta))
                        if scheme & LAPLACE:
                            mode = _mode(prec, m, n, n_tot, log_c, eta, &curv)
                            tau = 1.0 / sqrt(curv)
                            prop = mode + tau * ndtri(uniforms[t, r, c, 2])
                            log_w_new = (_log_target(prop, prec, m, n, n_tot, log_c)
                                         + 0.5 * ((prop - mode) / tau) * ((prop - mode) / tau))
                            log_w_old = (_log_target(eta, prec, m, n, n_tot, log_c)
                                         + 0.5 * ((eta - mode) / tau) * ((eta - mode) / tau))
                            if n_tot <= 0:
                                eta = prop
                            elif log(uniforms[t, r, c, 3]) < log_w_new - log_w_old:
                                eta = prop
                                accepted += 1
                        x[t, r, c] = eta
                        if eta > shift[t, r] + 30.0:
                            rsum[t, r] = rsum[t, r] * exp(shift[t, r] - eta)
                            shift[t, r] = eta
                        rsum[t, r] += exp(eta - shift[t, r]) - exp(old - shift[t, r])
                        if rsum[t, r] <= 0.0:
                            rsum[t, r] = 0.0
                            for j in range(C):
                                rsum[t, r] += exp(x[t, r, j] - shift[t, r])
    return accepted


cdef inline double _sigmoid(double f) noexcept nogil:
    if f > 30.0:
        f = 30.0
    elif f < -30.0:
        f = -30.0
    return 1.0 / (1.0 + exp(-f))


def sgns_chunk(double[:, ::1] w_in, double[:, ::1] w_out, long long[::1] tokens,
               long long[::1] indptr, int window, long long[:, ::1] negs,
               double alpha0, double min_alpha, long long done, long long total):
    cdef Py_ssize_t dim = w_in.shape[1], n_neg = negs.shape[1]
    cdef Py_ssize_t s, i, j, lo, hi, d, q, jlo, jhi
    cdef long long p = 0, center, ctx, tgt
    cdef double alpha, f, g, label, frac
    cdef double[::1] err = np.zeros(dim)

    with nogil:
        for s in range(indptr.shape[0] - 1):
            lo = indptr[s]
            hi = indptr[s + 1]
            for i in range(lo, hi):
                center = tokens[i]
                jlo = i - window if i - window > lo else lo
                jhi = i + window + 1 if i + window + 1 < hi else hi
                for j in range(jlo, jhi):
                    if j == i:
                        continue
                    ctx = tokens[j]
                    frac = 1.0 - <double>done / <double>total
                    alpha = alpha0 * (frac if frac > min_alpha else min_alpha)
                    for d in range(dim):
                        err[d] = 0.0
                    for q in range(-1, n_neg):
                        if q < 0:
                            tgt = ctx
                            label = 1.0
                        else:
                            tgt = negs[p, q]
                            if tgt == ctx:
                                continue
                            label = 0.0
                        f = 0.0
                        for d in range(dim):
                            f += w_in[center, d] * w_out[tgt, d]
                        g = (label - _sigmoid(f)) * alpha
                        for d in range(dim):
                            err[d] += g * w_out[tgt, d]
                            w_out[tgt, d] += g * w_in[center, d]
                    for d in range(dim):
                        w_in[center, d] += err[d]
                    p += 1
                    done += 1
    return done
