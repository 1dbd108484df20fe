# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Every routine here has a twin in ``_pycore`` performing the same floating
point operations in the same order; rows are independent, so splitting them
across OpenMP threads does not change any result.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, log, pow, fabs

cnp.import_array()


cdef inline double _radial(double r, int power, bint use_log) noexcept nogil:
    cdef double p = 1.0
    cdef int i
    if r == 0.0:
        return 0.0
    for i in range(power):
        p = p * r
    if use_log:
        return p * log(r)
    return p


cdef inline double _dist(const double[:, ::1] X, Py_ssize_t i,
                         const double[:, ::1] Y, Py_ssize_t j,
                         Py_ssize_t d) noexcept nogil:
    cdef double s = 0.0, t
    cdef Py_ssize_t k
    for k in range(d):
        t = X[i, k] - Y[j, k]
        s = s + t * t
    return sqrt(s)


def kernel_matrix(const double[:, ::1] X, const double[:, ::1] Y,
                  int power, bint use_log, int nthreads=1):
    cdef Py_ssize_t n = X.shape[0], m = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in prange(n, num_threads=nthreads, schedule="static"):
            for j in range(m):
                o[i, j] = _radial(_dist(X, i, Y, j, d), power, use_log)
    return out


def kernel_apply(const double[:, ::1] X, const double[:, ::1] Y,
                 int power, bint use_log, const double[::1] coef,
                 int nthreads=1):
    cdef Py_ssize_t n = X.shape[0], m = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in prange(n, num_threads=nthreads, schedule="static"):
            acc = 0.0
            for j in range(m):
                acc = acc + coef[j] * _radial(_dist(X, i, Y, j, d), power, use_log)
            o[i] = acc
    return out


def weighted_abs_sums(const double[:, ::1] V, const double[:, ::1] X,
                      const double[:, ::1] Y, const double[::1] rho,
                      double sigma, const unsigned char[::1] mask,
                      int nthreads=1):
    """Neumaier-compensated row sums of |V_ij| (1 + |x_i - y_j| / rho_i)^sigma."""
    cdef Py_ssize_t n = V.shape[0], m = V.shape[1], d = X.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, c, term, t
    cdef bint linear = sigma == 1.0
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in prange(n, num_threads=nthreads, schedule="static"):
            s = 0.0
            c = 0.0
            for j in range(m):
                if not mask[j]:
                    continue
                term = fabs(V[i, j])
                # pow(x, 1) == x exactly, so the shortcut changes no bits
                if linear:
                    term = term * (1.0 + _dist(X, i, Y, j, d) / rho[i])
                elif sigma != 0.0:
                    term = term * pow(1.0 + _dist(X, i, Y, j, d) / rho[i], sigma)
                t = s + term
                if fabs(s) >= fabs(term):
                    c = c + ((s - t) + term)
                else:
                    c = c + ((term - t) + s)
                s = t
            o[i] = s + c
    return out
