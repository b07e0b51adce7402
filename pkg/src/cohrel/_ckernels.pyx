# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled counterparts of cohrel._pykernels; same signatures and semantics.
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, expm1, pow, INFINITY, isinf

cnp.import_array()

cdef double LOCATION_GAP = 1e-12
cdef double LN2 = 0.6931471805599453


cdef inline double _log1mexp(double x) nogil:
    if x > LN2:
        return log1p(-exp(-x))
    return log(-expm1(-x))


cdef double _interval_loglik(double beta, double eta, double mu, const double[::1] l,
                             const double[::1] u, const signed char[::1] code) noexcept nogil:
    cdef Py_ssize_t i, n = l.shape[0]
    cdef double total = 0.0, zl, zu, a, b, log_ratio = log(beta / eta)
    for i in range(n):
        zl = l[i] - mu
        if zl < 0.0:
            zl = 0.0
        zl = zl / eta
        if code[i] == 0:
            if l[i] - mu <= LOCATION_GAP:
                return -INFINITY
            a = pow(zl, beta)
            total += log_ratio + (beta - 1.0) * log(zl) - a
        elif code[i] == 1:
            total -= pow(zl, beta)
        else:
            a = 0.0 if code[i] == 2 else pow(zl, beta)
            if isinf(u[i]):
                b = INFINITY
            else:
                zu = u[i] - mu
                if zu < 0.0:
                    zu = 0.0
                b = pow(zu / eta, beta)
            if b - a <= 0.0:
                return -INFINITY
            total += -a + _log1mexp(b - a)
    return total


def interval_loglik(double beta, double eta, double mu,
                    const double[::1] l, const double[::1] u, const signed char[::1] code):
    return _interval_loglik(beta, eta, mu, l, u, code)


def branch_likelihoods(double beta, double eta, double mu, const double[::1] t):
    cdef Py_ssize_t i, n = t.shape[0]
    out = np.empty((n, 3))
    cdef double[:, ::1] o = out
    cdef double z, h
    with nogil:
        for i in range(n):
            z = t[i] - mu
            if z < 0.0:
                z = 0.0
            z = z / eta
            h = pow(z, beta)
            o[i, 1] = exp(-h)
            o[i, 0] = beta / eta * pow(z, beta - 1.0) * o[i, 1] if t[i] - mu > LOCATION_GAP else 0.0
            o[i, 2] = -expm1(-h)
    return out


cdef Py_ssize_t _latent_draw(double beta, double eta, double mu, const double[::1] t,
                             double lam1, double lam2, double lam3, const double[::1] uniforms,
                             signed char[::1] c) noexcept nogil:
    cdef Py_ssize_t i, n = t.shape[0]
    cdef double z, h, rel, w1, w2, w3, total
    for i in range(n):
        z = t[i] - mu
        if z < 0.0:
            z = 0.0
        z = z / eta
        h = pow(z, beta)
        rel = exp(-h)
        w1 = lam1 * (beta / eta * pow(z, beta - 1.0) * rel if t[i] - mu > LOCATION_GAP else 0.0)
        w2 = lam2 * rel
        w3 = lam3 * (-expm1(-h))
        total = w1 + w2 + w3
        if not total > 0.0:
            return i
        if uniforms[i] < w1 / total:
            c[i] = 1
        elif uniforms[i] < (w1 + w2) / total:
            c[i] = 2
        elif w3 > 0.0:
            c[i] = 3
        elif w2 > 0.0:
            c[i] = 2
        else:
            c[i] = 1
    return -1


def latent_draw(double beta, double eta, double mu, const double[::1] t,
                double lam1, double lam2, double lam3, const double[::1] uniforms):
    codes = np.zeros(t.shape[0], dtype=np.int8)
    cdef Py_ssize_t bad = _latent_draw(beta, eta, mu, t, lam1, lam2, lam3, uniforms, codes)
    if bad >= 0:
        codes[:] = 0
    return codes, int(bad)


def reliability_matrix(beta, eta, mu, t):
    cdef const double[::1] b = np.ascontiguousarray(beta, dtype=float)
    cdef const double[::1] e = np.ascontiguousarray(eta, dtype=float)
    cdef const double[::1] m = np.ascontiguousarray(mu, dtype=float)
    cdef const double[::1] tt = np.ascontiguousarray(t, dtype=float)
    cdef Py_ssize_t i, k, n = b.shape[0], g = tt.shape[0]
    out = np.empty((n, g))
    cdef double[:, ::1] o = out
    cdef double z
    with nogil:
        for i in range(n):
            for k in range(g):
                z = tt[k] - m[i]
                if z <= 0.0:
                    o[i, k] = 1.0
                else:
                    o[i, k] = exp(-pow(z / e[i], b[i]))
    return out
