"""Independent reference solutions used by the tests.

Nothing here imports the package under test.
"""
import numpy as np


def natural_cubic_second_derivatives(x, y):
    """Second derivatives of the natural cubic spline through (x, y) via the Thomas algorithm."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    h = np.diff(x)
    M = np.zeros(n)
    if n < 3:
        return M
    a = h[:-1].copy()                  # sub-diagonal
    b = 2.0 * (h[:-1] + h[1:])         # diagonal
    c = h[1:].copy()                   # super-diagonal
    r = 6.0 * (np.diff(y[1:]) / h[1:] - np.diff(y[:-1]) / h[:-1])
    k = n - 2
    cp = np.zeros(k)
    rp = np.zeros(k)
    cp[0] = c[0] / b[0]
    rp[0] = r[0] / b[0]
    for i in range(1, k):
        den = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / den
        rp[i] = (r[i] - a[i] * rp[i - 1]) / den
    sol = np.zeros(k)
    sol[-1] = rp[-1]
    for i in range(k - 2, -1, -1):
        sol[i] = rp[i] - cp[i] * sol[i + 1]
    M[1:-1] = sol
    return M


def natural_cubic_eval(x, y, t):
    """Natural cubic spline value; linear extension outside [x0, xn]."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    t = np.asarray(t, float)
    M = natural_cubic_second_derivatives(x, y)
    h = np.diff(x)
    i = np.clip(np.searchsorted(x, t) - 1, 0, len(x) - 2)
    xl, xr, hi = x[i], x[i + 1], h[i]
    A = (xr - t) / hi
    B = (t - xl) / hi
    val = A * y[i] + B * y[i + 1] + ((A ** 3 - A) * M[i] + (B ** 3 - B) * M[i + 1]) * hi ** 2 / 6.0
    # outside the hull: straight lines with the end slopes
    s0 = (y[1] - y[0]) / h[0] - h[0] * M[1] / 6.0
    s1 = (y[-1] - y[-2]) / h[-1] + h[-1] * M[-2] / 6.0
    val = np.where(t < x[0], y[0] + s0 * (t - x[0]), val)
    val = np.where(t > x[-1], y[-1] + s1 * (t - x[-1]), val)
    return val


def natural_cubic_cardinals(x, t):
    """Matrix whose column j is the natural cubic cardinal function of node j at points t."""
    n = len(x)
    return np.column_stack([natural_cubic_eval(x, np.eye(n)[j], t) for j in range(n)])


def hat(x, j, t):
    """Piecewise-linear cardinal function of node j, constant outside the hull."""
    x = np.asarray(x, float)
    order = np.argsort(x)
    e = np.zeros(len(x))
    e[j] = 1.0
    return np.interp(t, x[order], e[order])


def brute_separation(pts):
    pts = np.asarray(pts, float)
    D = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    np.fill_diagonal(D, np.inf)
    return D.min(axis=1)


def central_difference(f, x, beta, h=1e-3):
    """Mixed partial derivative by repeated central differences (error O(h^2))."""
    x = np.asarray(x, float)
    beta = list(beta)
    for axis, k in enumerate(beta):
        if k:
            e = np.zeros_like(x)
            e[axis] = h
            rest = beta.copy()
            rest[axis] -= 1
            return (central_difference(f, x + e, rest, h) - central_difference(f, x - e, rest, h)) / (2 * h)
    return f(x)
