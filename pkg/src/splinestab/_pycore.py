"""Pure NumPy fallback for the compiled core.

Loops run over the short axes (coordinates, columns) and vectorize over
rows, reproducing the compiled routines' operation order.
"""
import numpy as np


def _radial(r, power, use_log):
    p = np.ones_like(r)
    for _ in range(power):
        p = p * r
    if use_log:
        with np.errstate(divide="ignore", invalid="ignore"):
            p = p * np.log(r)
    return np.where(r == 0.0, 0.0, p)


def _sqdist(X, Y):
    s = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        t = X[:, k, None] - Y[None, :, k]
        s = s + t * t
    return s


def kernel_matrix(X, Y, power, use_log, nthreads=1):
    return _radial(np.sqrt(_sqdist(X, Y)), power, use_log)


def kernel_apply(X, Y, power, use_log, coef, nthreads=1):
    K = kernel_matrix(X, Y, power, use_log)
    acc = np.zeros(X.shape[0])
    for j in range(Y.shape[0]):
        acc = acc + coef[j] * K[:, j]
    return acc


def weighted_abs_sums(V, X, Y, rho, sigma, mask, nthreads=1):
    n, m = V.shape
    s = np.zeros(n)
    c = np.zeros(n)
    dist = np.sqrt(_sqdist(X, Y)) if sigma != 0.0 else None
    for j in range(m):
        if not mask[j]:
            continue
        term = np.abs(V[:, j])
        if sigma == 1.0:
            term = term * (1.0 + dist[:, j] / rho)
        elif sigma != 0.0:
            term = term * np.power(1.0 + dist[:, j] / rho, sigma)
        t = s + term
        big = np.abs(s) >= np.abs(term)
        c = c + np.where(big, (s - t) + term, (term - t) + s)
        s = t
    return s + c
