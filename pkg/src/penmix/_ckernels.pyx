# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled E-step and sufficient-statistic kernels.

Signatures mirror ``penmix._pykernels`` exactly; see that module for the
reference semantics.
"""

import numpy as np

from libc.math cimport exp, log, INFINITY

cdef double LOG_2PI = 1.8378770664093453


cdef void _component_logprobs(const double[:, ::1] X, Py_ssize_t i,
                              const double[::1] const_m,
                              const double[:, ::1] means,
                              const double[:, :, ::1] chols,
                              double[::1] z, double[::1] lp) noexcept nogil:
    cdef Py_ssize_t M = means.shape[0]
    cdef Py_ssize_t d = means.shape[1]
    cdef Py_ssize_t m, j, k
    cdef double acc, maha
    for m in range(M):
        maha = 0.0
        for j in range(d):
            acc = X[i, j] - means[m, j]
            for k in range(j):
                acc -= chols[m, j, k] * z[k]
            acc /= chols[m, j, j]
            z[j] = acc
            maha += acc * acc
        lp[m] = const_m[m] - 0.5 * maha


cdef double _normalise(double[::1] lp, Py_ssize_t M) noexcept nogil:
    # turns log weights into probabilities in place, returns log-sum-exp
    cdef Py_ssize_t m
    cdef double mx = -INFINITY
    cdef double s = 0.0
    for m in range(M):
        if lp[m] > mx:
            mx = lp[m]
    if mx == -INFINITY:
        return -INFINITY
    for m in range(M):
        lp[m] = exp(lp[m] - mx)
        s += lp[m]
    for m in range(M):
        lp[m] /= s
    return mx + log(s)


def _log_constants(const double[::1] log_w, const double[:, :, ::1] chols):
    cdef Py_ssize_t M = chols.shape[0]
    cdef Py_ssize_t d = chols.shape[1]
    cdef Py_ssize_t m, j
    out = np.empty(M)
    cdef double[::1] c = out
    for m in range(M):
        c[m] = log_w[m] - 0.5 * d * LOG_2PI
        for j in range(d):
            c[m] -= log(chols[m, j, j])
    return out


def e_step(X, log_w, means, chols):
    """Responsibilities (n, M) and per-row log mixture density (n,)."""
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] mu = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[:, :, ::1] L = np.ascontiguousarray(chols, dtype=np.float64)
    cdef const double[::1] cm = _log_constants(
        np.ascontiguousarray(log_w, dtype=np.float64), L)
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t M = mu.shape[0]
    cdef Py_ssize_t d = mu.shape[1]
    resp = np.empty((n, M))
    point_ll = np.empty(n)
    cdef double[:, ::1] R = resp
    cdef double[::1] ll = point_ll
    cdef double[::1] z = np.empty(d)
    cdef double[::1] lp = np.empty(M)
    cdef Py_ssize_t i, m
    with nogil:
        for i in range(n):
            _component_logprobs(Xv, i, cm, mu, L, z, lp)
            ll[i] = _normalise(lp, M)
            for m in range(M):
                R[i, m] = lp[m]
    return resp, point_ll


def em_pass(X, log_w, means, chols):
    """One fused E-step and moment accumulation.

    Returns ``(loglik, mass, new_means, new_covs, ok)``. Moments are
    accumulated around the current means for stability; ``ok`` is False
    when some row had zero density under every component.
    """
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] mu = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[:, :, ::1] L = np.ascontiguousarray(chols, dtype=np.float64)
    cdef const double[::1] cm = _log_constants(
        np.ascontiguousarray(log_w, dtype=np.float64), L)
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t M = mu.shape[0]
    cdef Py_ssize_t d = mu.shape[1]
    mass = np.zeros(M)
    s1 = np.zeros((M, d))
    s2 = np.zeros((M, d, d))
    cdef double[::1] N = mass
    cdef double[:, ::1] S1 = s1
    cdef double[:, :, ::1] S2 = s2
    cdef double[::1] z = np.empty(d)
    cdef double[::1] lp = np.empty(M)
    cdef double[::1] diff = np.empty(d)
    cdef Py_ssize_t i, m, j, k
    cdef double h, row_ll, total = 0.0
    cdef bint ok = True
    with nogil:
        for i in range(n):
            _component_logprobs(Xv, i, cm, mu, L, z, lp)
            row_ll = _normalise(lp, M)
            if row_ll == -INFINITY:
                ok = False
                break
            total += row_ll
            for m in range(M):
                h = lp[m]
                if h == 0.0:
                    continue
                N[m] += h
                for j in range(d):
                    diff[j] = Xv[i, j] - mu[m, j]
                    S1[m, j] += h * diff[j]
                for j in range(d):
                    for k in range(j + 1):
                        S2[m, j, k] += h * diff[j] * diff[k]
        if ok:
            for m in range(M):
                if N[m] <= 0.0:
                    continue
                for j in range(d):
                    S1[m, j] /= N[m]
                for j in range(d):
                    for k in range(j + 1):
                        S2[m, j, k] = S2[m, j, k] / N[m] - S1[m, j] * S1[m, k]
                        S2[m, k, j] = S2[m, j, k]
                for j in range(d):
                    S1[m, j] += mu[m, j]
    return total, mass, s1, s2, bool(ok)


def sq_distances(X, centers):
    """Squared Euclidean distances, shape (n, K)."""
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t K = C.shape[0]
    cdef Py_ssize_t d = Xv.shape[1]
    out = np.empty((n, K))
    cdef double[:, ::1] D = out
    cdef Py_ssize_t i, k, j
    cdef double acc, t
    with nogil:
        for i in range(n):
            for k in range(K):
                acc = 0.0
                for j in range(d):
                    t = Xv[i, j] - C[k, j]
                    acc += t * t
                D[i, k] = acc
    return out
