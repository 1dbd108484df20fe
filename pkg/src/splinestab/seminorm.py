"""Order-m Sobolev seminorms over balls, annuli and truncated ball complements.

The squared seminorm is ``sum_{|beta|=m} m!/beta! * int |D^beta f|^2``.
Integrals use composite Gauss-Legendre rules: interval cells in one
dimension and polar (radius x angle) cells in two. Cell boundaries are
placed at the centers (d=1) or at the radii of the centers (d=2), so the
piecewise-smooth kernel derivatives are integrated cell by cell. Nodes that
fall within ``exclusion`` of a center are dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import cKDTree

from .geometry import Region
from .kernel import multi_indices

TAIL_FLOOR = 1e-14
NODE_CHUNK = 40000


@dataclass(frozen=True)
class QuadratureSpec:
    order: int = 8
    cells_per_unit: float = 32.0
    angular_cells: int = 32
    exclusion: float = 1e-8

    def __post_init__(self):
        if self.order < 4:
            raise ValueError("Gauss-Legendre order must be >= 4")
        if self.cells_per_unit <= 0 or self.angular_cells < 1:
            raise ValueError("cell counts must be positive")
        if self.exclusion <= 0:
            raise ValueError("exclusion radius must be positive")

    def refined(self):
        return QuadratureSpec(self.order, 2 * self.cells_per_unit, 2 * self.angular_cells,
                              self.exclusion)


class UnsupportedDimension(NotImplementedError):
    pass


class TailExhausted(ArithmeticError):
    """The reference tail seminorm is too small to divide by."""


@dataclass(frozen=True)
class PartialsFunction:
    """A function given by explicit callables for its partial derivatives."""

    dim: int
    partials: dict

    def partial(self, beta, x):
        fn = self.partials.get(tuple(beta))
        if fn is None:
            raise KeyError(f"partial {tuple(beta)} unavailable")
        pts = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.broadcast_to(np.asarray(fn(pts), dtype=float), (len(pts),)).copy()


@dataclass(frozen=True)
class Seminorm:
    value: float
    quad_error: float
    tail_estimate: float = 0.0
    nodes: int = 0

    def __float__(self):
        return self.value


def _weights(m, d):
    out = []
    for beta in multi_indices(m, d):
        out.append((beta, math.factorial(m) / math.prod(math.factorial(b) for b in beta)))
    return out


def _integrand(f, m, pts):
    d = pts.shape[1]
    total = np.zeros(len(pts))
    for start in range(0, len(pts), NODE_CHUNK):
        chunk = pts[start:start + NODE_CHUNK]
        acc = np.zeros(len(chunk))
        for beta, w in _weights(m, d):
            try:
                v = f.partial(beta, chunk)
            except KeyError as exc:
                raise ValueError(f"partial {beta} unavailable") from exc
            acc += w * v * v
        total[start:start + NODE_CHUNK] = acc
    return total


def _centers_of(f):
    c = getattr(f, "centers", None)
    return None if c is None else c.points


def _split(a, b, breaks, per_unit):
    pts = np.unique(np.concatenate([[a, b], breaks[(breaks > a) & (breaks < b)]]))
    out = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        k = max(1, int(math.ceil((hi - lo) * per_unit - 1e-9)))
        edges = np.linspace(lo, hi, k + 1)
        out.append(np.column_stack([edges[:-1], edges[1:]]))
    return np.vstack(out) if out else np.zeros((0, 2))


def _gl_nodes(cells, order):
    t, w = leggauss(order)
    a, b = cells[:, :1], cells[:, 1:]
    x = 0.5 * (a + b) + 0.5 * (b - a) * t
    wx = 0.5 * (b - a) * w
    return x.ravel(), wx.ravel()


def _rule_1d(region, spec, centers):
    x0 = region.center[0]
    lo, hi = region.radial_bounds
    breaks = np.array([]) if centers is None else centers[:, 0]
    nodes, weights = [], []
    for sign in (-1.0, 1.0):
        a, b = sorted((x0 + sign * lo, x0 + sign * hi))
        x, w = _gl_nodes(_split(a, b, breaks, spec.cells_per_unit), spec.order)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes)[:, None], np.concatenate(weights)


def _rule_2d(region, spec, centers):
    c = np.array(region.center)
    lo, hi = region.radial_bounds
    breaks = np.array([]) if centers is None else np.linalg.norm(centers - c, axis=1)
    r, wr = _gl_nodes(_split(lo, hi, breaks, spec.cells_per_unit), spec.order)
    edges = np.linspace(0.0, 2 * math.pi, spec.angular_cells + 1)
    th, wt = _gl_nodes(np.column_stack([edges[:-1], edges[1:]]), spec.order)
    R, T = np.meshgrid(r, th, indexing="ij")
    W = (wr * r)[:, None] * wt[None, :]
    pts = c + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    return pts, W.ravel()


def _rule(region, spec, centers):
    if region.dim == 1:
        pts, w = _rule_1d(region, spec, centers)
    elif region.dim == 2:
        pts, w = _rule_2d(region, spec, centers)
    else:
        raise UnsupportedDimension("seminorm quadrature supports d <= 2 only")
    if centers is not None and len(centers):
        dist, _ = cKDTree(centers).query(pts, k=1)
        keep = dist > spec.exclusion
        pts, w = pts[keep], w[keep]
    return pts, w


def _squared(f, m, region, spec):
    pts, w = _rule(region, spec, _centers_of(f))
    vals = _integrand(f, m, pts)
    return float(np.sum(w * vals)), len(pts)


def _shell_density(f, m, region, radius, spec):
    """Angular integral of the integrand on the sphere of given radius, times r^(d-1)."""
    d = region.dim
    c = np.array(region.center)
    if d == 1:
        pts = np.array([[c[0] - radius], [c[0] + radius]])
        return float(np.sum(_integrand(f, m, pts)))
    edges = np.linspace(0.0, 2 * math.pi, spec.angular_cells + 1)
    th, wt = _gl_nodes(np.column_stack([edges[:-1], edges[1:]]), spec.order)
    pts = c + radius * np.column_stack([np.cos(th), np.sin(th)])
    return float(np.sum(wt * _integrand(f, m, pts)) * radius)


def sobolev_seminorm(f, m, region, spec=None):
    """Seminorm of ``f`` over ``region`` with a Richardson-style error estimate.

    ``f`` must provide ``partial(beta, points)``. The error estimate is the
    change between the given resolution and a doubled one; the finer value
    is returned. For complements, the far field beyond the truncation radius
    is estimated assuming the integrand decays like ``r**(-2d)``.
    """
    spec = spec or QuadratureSpec()
    coarse, _ = _squared(f, m, region, spec)
    fine, nodes = _squared(f, m, region, spec.refined())
    value = math.sqrt(max(fine, 0.0))
    err = abs(value - math.sqrt(max(coarse, 0.0)))
    tail = 0.0
    if region.kind == "complement":
        T = region.truncation
        far = _shell_density(f, m, region, T, spec) * T / region.dim
        tail = math.sqrt(max(fine, 0.0) + far) - value
    return Seminorm(value, err, tail, nodes)


@dataclass(frozen=True)
class TailProfile:
    radii: np.ndarray
    values: np.ndarray
    quad_error: np.ndarray
    truncation: float

    def rows(self):
        return list(zip(self.radii, self.values, self.quad_error))

    def to_csv(self):
        lines = ["T,tail_seminorm,quad_error"]
        lines += [f"{t:.17g},{v:.17g},{e:.17g}" for t, v, e in self.rows()]
        return "\n".join(lines) + "\n"


def default_truncation(centers, x):
    """Farthest center distance from ``x`` plus four domain diameters."""
    pts = centers.points
    far = float(np.max(np.linalg.norm(pts - np.asarray(x, dtype=float), axis=1)))
    return far + 4.0 * centers.domain.r1


def _shells(f, m, x, radii, truncation, spec):
    edges = list(radii) + [truncation]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            out.append(0.0)
            continue
        if a == 0.0:
            reg = Region("ball", x, b)
        else:
            reg = Region("annulus", x, b, width=b - a)
        q, _ = _squared(f, m, reg, spec)
        out.append(max(q, 0.0))
    return np.array(out)


def tail_profile(chi, xi, radii, m, spec=None, truncation=None):
    """Seminorms of ``chi`` over ``B^c(xi, T)`` (truncated) for increasing ``T``.

    Shell integrals between consecutive radii are summed from the outside
    in, so the profile is nonincreasing by construction.
    """
    spec = spec or QuadratureSpec()
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) < 0) or np.any(radii < 0):
        raise ValueError("radii must be nonnegative and increasing")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if truncation is None:
        truncation = default_truncation(chi.centers, xi)
    if radii[-1] >= truncation:
        raise ValueError("radii must stay below the truncation radius")
    coarse = _shells(chi, m, xi, radii, truncation, spec)
    fine = _shells(chi, m, xi, radii, truncation, spec.refined())
    tail_f = np.sqrt(np.cumsum(fine[::-1])[::-1])
    tail_c = np.sqrt(np.cumsum(coarse[::-1])[::-1])
    return TailProfile(radii, tail_f, np.abs(tail_f - tail_c), float(truncation))


def tail_ratio(chi, xi, inner, outer, m, spec=None, truncation=None):
    """Ratio of tail seminorms beyond ``outer`` and beyond ``inner``."""
    if outer < inner:
        raise ValueError("outer radius must not be smaller than inner")
    prof = tail_profile(chi, xi, [inner, outer], m, spec, truncation)
    den = prof.values[0]
    if den < TAIL_FLOOR:
        raise TailExhausted(f"tail beyond {inner:.3e} is {den:.3e}")
    return float(prof.values[1] / den)


def bulk_ratio(chi, xi, rho_xi, eps, t, m, spec=None, truncation=None):
    """Measured ratio of the tails beyond ``rho t**(1/eps)`` and ``rho (t-3)**(1/eps)``."""
    if t <= 3:
        raise ValueError("bulk ratio needs t > 3")
    inner = rho_xi * (t - 3.0) ** (1.0 / eps)
    outer = rho_xi * t ** (1.0 / eps)
    return tail_ratio(chi, xi, inner, outer, m, spec, truncation)
