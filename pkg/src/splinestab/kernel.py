"""Surface spline kernel and shifted/scaled monomial bases.

The kernel of order ``m`` in ``d`` dimensions is ``r**(2m-d)`` for odd
``d`` and ``r**(2m-d) * log(r)`` for even ``d``.

Partial derivatives of ``phi(|x|)`` are generated once per multi-index by
writing the kernel as ``g(s)`` with ``s = |x|**2`` and differentiating
terms ``c * x**gamma * g^(j)(s)`` with exact rational coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np


class SingularPointError(ValueError):
    """A kernel derivative was requested at its singular point."""

    def __init__(self, indices):
        self.indices = np.atleast_1d(indices)
        super().__init__(f"singular point: derivative undefined at {len(self.indices)} point(s)")


@dataclass(frozen=True)
class SplineOrder:
    m: int
    d: int

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("need m >= 1 and d >= 1")
        if 2 * self.m - self.d <= 0:
            raise ValueError(f"surface spline needs m > d/2 (got m={self.m}, d={self.d})")

    @property
    def power(self):
        return 2 * self.m - self.d

    @property
    def even_dim(self):
        return self.d % 2 == 0

    @property
    def poly_degree(self):
        return self.m - 1

    @property
    def energy_sign(self):
        """Sign making the kernel quadratic form positive on the moment-free subspace."""
        k = self.power
        if self.even_dim:
            return -1 if (k // 2) % 2 == 0 else 1
        return -1 if ((k + 1) // 2) % 2 else 1


def phi(order, r):
    """Kernel value at radius ``r`` (scalar or array); zero at the origin."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    k = order.power
    out = np.power(r, k)
    if order.even_dim:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, out * np.log(np.where(r > 0, r, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def _radial_coeffs(order, nmax):
    """(alpha_j, beta_j) with g^(j)(s) = s^(k/2 - j) * (alpha_j log s + beta_j)."""
    a = Fraction(order.power, 2)
    if order.even_dim:
        alpha, beta = Fraction(1, 2), Fraction(0)
    else:
        alpha, beta = Fraction(0), Fraction(1)
    out = [(alpha, beta)]
    for j in range(nmax):
        alpha, beta = (a - j) * alpha, (a - j) * beta + alpha
        out.append((alpha, beta))
    return tuple(out)


@lru_cache(maxsize=None)
def _derivative_terms(order, beta):
    """Terms (coef, gamma, j) of D^beta phi(|x|) = sum coef x^gamma g^(j)(|x|^2)."""
    d = order.d
    terms = {((0,) * d, 0): Fraction(1)}
    for axis, count in enumerate(beta):
        for _ in range(count):
            new = {}
            for (gamma, j), c in terms.items():
                if gamma[axis]:
                    g2 = gamma[:axis] + (gamma[axis] - 1,) + gamma[axis + 1:]
                    new[(g2, j)] = new.get((g2, j), 0) + c * gamma[axis]
                g2 = gamma[:axis] + (gamma[axis] + 1,) + gamma[axis + 1:]
                new[(g2, j + 1)] = new.get((g2, j + 1), 0) + 2 * c
            terms = {key: c for key, c in new.items() if c != 0}
    return tuple((c, gamma, j) for (gamma, j), c in sorted(terms.items()))


def phi_partial(order, x, beta):
    """Partial derivative ``D^beta phi(|x|)`` at one point or an ``(n, d)`` array.

    Orders below ``2m - d`` are continuous at the origin and evaluate to 0
    there; higher orders raise :class:`SingularPointError`.
    """
    beta = tuple(int(b) for b in beta)
    if len(beta) != order.d or min(beta) < 0:
        raise ValueError("multi-index length must equal d")
    if sum(beta) > order.m:
        raise ValueError("|beta| must not exceed m")
    pts = as_points(x, order.d)
    single = is_single_point(x, order.d)
    if pts.shape[1] != order.d:
        raise ValueError("point dimension mismatch")
    terms = _derivative_terms(order, beta)
    radial = _radial_coeffs(order, sum(beta))
    s = np.einsum("ij,ij->i", pts, pts)
    zero = s == 0.0
    if np.any(zero) and sum(beta) >= order.power:
        raise SingularPointError(np.flatnonzero(zero))
    safe = np.where(zero, 1.0, s)
    r = np.sqrt(safe)
    logs = np.log(safe)
    out = np.zeros(len(pts))
    k = order.power
    for c, gamma, j in terms:
        alpha, beta_j = radial[j]
        mono = np.prod(pts ** np.array(gamma), axis=1)
        out += float(c) * mono * r ** (k - 2 * j) * (float(alpha) * logs + float(beta_j))
    out[zero] = 0.0
    return float(out[0]) if single else out


def multi_indices(order, dim):
    """All multi-indices of total degree exactly ``order``, lexicographically descending."""
    if dim == 1:
        return [(order,)]
    out = []
    for first in range(order, -1, -1):
        out.extend((first,) + rest for rest in multi_indices(order - first, dim - 1))
    return out


def poly_dim(degree, dim):
    return math.comb(degree + dim, dim) if degree >= 0 else 0


@dataclass(frozen=True)
class PolyBasis:
    """Monomials of degree <= ``degree`` in ``(x - center) / scale``."""

    degree: int
    dim: int
    center: tuple = None
    scale: float = 1.0
    exponents: tuple = field(init=False)

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        c = (0.0,) * self.dim if self.center is None else tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) != self.dim:
            raise ValueError("basis center dimension mismatch")
        if self.scale <= 0:
            raise ValueError("basis scale must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "scale", float(self.scale))
        exps = [e for deg in range(self.degree + 1) for e in multi_indices(deg, self.dim)]
        object.__setattr__(self, "exponents", tuple(exps))

    def __len__(self):
        return len(self.exponents)

    def normalize(self, points):
        pts = as_points(points, self.dim)
        if pts.shape[1] != self.dim:
            raise ValueError("point dimension mismatch")
        return (pts - np.array(self.center)) / self.scale

    def vandermonde(self, points, beta=None):
        """Row i, column j: the j-th basis monomial (or its D^beta) at point i."""
        z = self.normalize(points)
        cols = []
        for gamma in self.exponents:
            if beta is None:
                cols.append(np.prod(z ** np.array(gamma), axis=1))
                continue
            if any(g < b for g, b in zip(gamma, beta)):
                cols.append(np.zeros(len(z)))
                continue
            fac = math.prod(math.perm(g, b) for g, b in zip(gamma, beta))
            lowered = np.array(gamma) - np.array(beta)
            cols.append(fac * np.prod(z ** lowered, axis=1) / self.scale ** sum(beta))
        return np.column_stack(cols) if cols else np.zeros((len(z), 0))


def poly_vandermonde(basis, points):
    return basis.vandermonde(points)


def poly_eval(basis, coefficients, x):
    coef = np.asarray(coefficients, dtype=float)
    if coef.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} coefficients, got {coef.shape}")
    vals = basis.vandermonde(x) @ coef
    return float(vals[0]) if is_single_point(x, basis.dim) else vals


def as_points(x, dim):
    """Coerce ``x`` to an ``(n, dim)`` array; 1-D input is a point list when ``dim == 1``."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        return pts.reshape(1, 1)
    if pts.ndim == 1:
        return pts[:, None] if dim == 1 else pts[None, :]
    return pts


def is_single_point(x, dim):
    return np.ndim(x) == 0 or (np.ndim(x) == 1 and dim > 1)
