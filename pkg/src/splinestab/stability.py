"""Lebesgue constants, penalized Lebesgue constants and Lagrange decay fits.

Suprema over the domain are taken over a finite evaluation grid. The
density at grid points comes from a density field evaluated on that same
grid; it is never interpolated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .density import (density_field, fit_slow_growth, slow_growth_majorant,
                      weak_quasi_uniformity)
from .geometry import separation
from .interpolation import LagrangeBasis
from .kernel import SplineOrder, as_points

GRID_CAP = 1_000_000
VALUE_FLOOR = 1e-14
MIN_DECAY_SAMPLES = 8
ROW_CHUNK = 8192


@dataclass(frozen=True)
class GridSpec:
    spacing: float
    shape: tuple
    count: int

    def describe(self):
        if math.isnan(self.spacing):
            return f"explicit points={self.count}"
        return f"uniform spacing={self.spacing:.17g} shape={'x'.join(map(str, self.shape))} points={self.count}"


def default_grid(centers, spacing=None):
    """Uniform evaluation grid over the domain's bounding box, clipped to the domain.

    The default spacing is ``min q / 4`` in one dimension and ``min q / 3``
    otherwise, coarsened if needed to stay under ``GRID_CAP`` points.
    """
    dom = centers.domain
    d = centers.dim
    if spacing is None:
        q = float(np.min(separation(centers))) if len(centers) > 1 else dom.r1
        spacing = q / 4.0 if d == 1 else q / 3.0
    if dom.kind == "box":
        lo, hi = np.array(dom.lower), np.array(dom.upper)
    else:
        lo = np.array(dom.center) - dom.radius
        hi = np.array(dom.center) + dom.radius
    counts = np.maximum(2, np.ceil((hi - lo) / spacing).astype(int) + 1)
    while np.prod(counts.astype(float)) > GRID_CAP:
        spacing *= 1.25
        counts = np.maximum(2, np.ceil((hi - lo) / spacing).astype(int) + 1)
    axes = [np.linspace(a, b, k) for a, b, k in zip(lo, hi, counts)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    if dom.kind == "ball":
        grid = grid[dom.contains(grid, tol=1e-12 * dom.r1)]
    return grid, GridSpec(float(spacing), tuple(int(c) for c in counts), len(grid))


def interval_grid(centers, per_interval=8):
    """One-dimensional grid splitting every gap between sorted centers into equal parts.

    Resolves each gap at the same relative resolution, which keeps graded
    sets affordable where a uniform grid at the smallest gap would not be.
    Domain parts outside the center hull get the resolution of the nearest gap.
    """
    if centers.dim != 1:
        raise ValueError("interval grid is one-dimensional")
    if per_interval < 1:
        raise ValueError("per_interval must be positive")
    x = np.sort(centers.points[:, 0])
    t = np.linspace(0.0, 1.0, per_interval + 1)[:-1]
    inner = (x[:-1, None] + np.diff(x)[:, None] * t).ravel() if len(x) > 1 else x[:0]
    lo, hi = centers.domain.lower[0], centers.domain.upper[0]
    parts = []
    gap = (x[1] - x[0]) if len(x) > 1 else hi - lo
    if x[0] > lo:
        k = max(1, int(math.ceil((x[0] - lo) / gap * per_interval)))
        parts.append(np.linspace(lo, x[0], k + 1)[:-1])
    parts += [inner, x[-1:]]
    gap = (x[-1] - x[-2]) if len(x) > 1 else hi - lo
    if x[-1] < hi:
        k = max(1, int(math.ceil((hi - x[-1]) / gap * per_interval)))
        parts.append(np.linspace(x[-1], hi, k + 1)[1:])
    grid = np.concatenate(parts)[:, None]
    return grid, GridSpec(float("nan"), (len(grid),), len(grid))


def make_grid(centers, kind="uniform", per_interval=8):
    if kind == "uniform":
        return default_grid(centers)
    if kind == "interval":
        return interval_grid(centers, per_interval)
    raise ValueError(f"unknown grid kind {kind!r}")


def _mask(basis, restrict_to):
    n = len(basis.centers)
    if restrict_to is None or (isinstance(restrict_to, str) and restrict_to == "support"):
        mask = basis.centers.support_mask
        if not mask.any():
            raise ValueError("no centers inside the support region (Xi_f is empty)")
        return mask
    if isinstance(restrict_to, str) and restrict_to == "all":
        return np.ones(n, dtype=bool)
    mask = np.asarray(restrict_to, dtype=bool)
    if mask.shape != (n,):
        raise ValueError("restriction mask must have one entry per center")
    return mask


def _weighted_sums(basis, grid, rho, sigma, mask):
    out = np.empty(len(grid))
    for start in range(0, len(grid), ROW_CHUNK):
        block = grid[start:start + ROW_CHUNK]
        V = basis.values(block)
        out[start:start + ROW_CHUNK] = _backend.weighted_abs_sums(
            V, block, basis.centers.points, rho[start:start + ROW_CHUNK], sigma, mask)
    return out


def lebesgue_function(basis, grid, restrict_to=None):
    grid = as_points(grid, basis.order.d)
    return _weighted_sums(basis, grid, np.ones(len(grid)), 0.0, _mask(basis, restrict_to))


def lebesgue_constant(basis, grid, restrict_to=None):
    """``max_x sum_xi |chi_xi(x)|`` over the grid and the first grid index attaining it."""
    vals = lebesgue_function(basis, grid, restrict_to)
    i = int(np.argmax(vals))
    return float(vals[i]), i


def rho_on(field, grid):
    """Density values at the grid points, looked up in the field's point list."""
    lookup = {row.tobytes(): i for i, row in enumerate(np.ascontiguousarray(field.points))}
    idx = np.empty(len(grid), dtype=int)
    for k, row in enumerate(np.ascontiguousarray(grid)):
        i = lookup.get(row.tobytes())
        if i is None:
            raise KeyError(f"density missing at grid point {row.tolist()}")
        idx[k] = i
    return field.rho[idx]


def penalized_function(basis, rho, sigma, grid, restrict_to=None):
    """Penalized sums at each grid point given density values ``rho`` there."""
    grid = as_points(grid, basis.order.d)
    return _weighted_sums(basis, grid, np.asarray(rho, dtype=float), float(sigma),
                          _mask(basis, restrict_to))


def penalized_lebesgue(basis, field, sigma, grid, restrict_to=None):
    """``max_x sum_xi |chi_xi(x)| (1 + |x - xi| / rho(x))**sigma`` and its argmax index.

    With ``sigma == 0`` this is exactly :func:`lebesgue_constant`.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    grid = as_points(grid, basis.order.d)
    vals = penalized_function(basis, rho_on(field, grid), sigma, grid, restrict_to)
    i = int(np.argmax(vals))
    return float(vals[i]), i


@dataclass(frozen=True)
class DecayFit:
    center: int
    C: float
    lam: float
    residual: float
    samples: int
    envelope_violations: float
    status: str
    C_normalized: float

    @property
    def resolved(self):
        return self.status == "ok"


def decay_exponent(order, eps):
    return (1.0 - eps) * (order.m - order.d / 2.0)


def fit_decay(basis, field, eps=None, r0=None, samples=None, centers=None):
    """Fit ``|chi_xi(x)| ~ C (1 + t)**s exp(-lam (min(|x - xi|, r0) / rho(xi))**eps)``.

    ``t = |x - xi| / rho(xi)``, ``s = (1 - eps)(m - d/2)``; samples inside
    ``B(xi, rho(xi))`` are excluded. Returns one :class:`DecayFit` per
    requested center index.
    """
    if eps is None:
        eps = field.eps_star
        if eps <= 0:
            raise ValueError("field has no slow-growth exponent; pass eps explicitly")
    cs = basis.centers
    r0 = cs.domain.r0 if r0 is None else float(r0)
    order = basis.order
    s = decay_exponent(order, eps)
    rho_c = field.rho_at_centers()
    q = separation(cs) if len(cs) > 1 else np.full(1, np.inf)
    X = as_points(samples, order.d) if samples is not None else default_grid(cs)[0]
    which = range(len(cs)) if centers is None else centers
    values = np.abs(basis.values(X))
    fits = []
    for j in which:
        dist = np.linalg.norm(X - cs.points[j], axis=1)
        use = dist >= rho_c[j]
        if use.sum() < MIN_DECAY_SAMPLES:
            raise ValueError(f"fewer than {MIN_DECAY_SAMPLES} usable samples for center {j}")
        t = dist[use] / rho_c[j]
        v = values[use, j]
        floored = v < VALUE_FLOOR
        y = np.log(np.maximum(v, VALUE_FLOOR)) - s * np.log1p(t)
        z = -(np.minimum(dist[use], r0) / rho_c[j]) ** eps
        Amat = np.column_stack([np.ones_like(z), z])
        (logC, lam), *_ = np.linalg.lstsq(Amat, y, rcond=None)
        resid = float(np.sqrt(np.mean((Amat @ np.array([logC, lam]) - y) ** 2)))
        status = "ok"
        if floored.mean() >= 0.5:
            status, lam = "no decay resolved", math.inf
            logC = float(np.max(y))
        elif not lam > 0:
            status = "no decay resolved"
        C = float(np.exp(logC))
        if math.isfinite(lam):
            viol = float(np.mean(v > 2.0 * C * (1 + t) ** s * np.exp(lam * z)))
        else:
            viol = float(np.mean(~floored & (v > 2.0 * C)))
        ratio = (rho_c[j] / q[j]) ** (order.m - order.d / 2.0)
        fits.append(DecayFit(int(j), C, float(lam), resid, int(use.sum()), viol, status, float(C / ratio)))
    return fits


@dataclass
class StabilityReport:
    sigma: float
    grid: GridSpec
    lebesgue: float
    penalized: float
    argmax: np.ndarray
    eps: float
    s: float
    sigma1: float
    r0: float
    decay: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def summary(self):
        lines = [f"sigma={self.sigma:.17g}", f"grid={self.grid.describe()}",
                 f"lebesgue={self.lebesgue:.17g}", f"penalized={self.penalized:.17g}",
                 "argmax=" + " ".join(f"{v:.17g}" for v in self.argmax),
                 f"eps={self.eps:.17g}", f"s={self.s:.17g}", f"sigma1={self.sigma1:.17g}",
                 f"r0={self.r0:.17g}"]
        lines += [f"{k}={v}" for k, v in self.extra.items()]
        return "\n".join(lines) + "\n"


def stability_report(basis, field, sigma, grid=None, eps=None, restrict_to=None):
    """Classical and penalized constants on a grid, with the theoretical exponents."""
    cs = basis.centers
    if grid is None:
        grid, gspec = default_grid(cs)
    else:
        grid = as_points(grid, cs.dim)
        gspec = GridSpec(float("nan"), (len(grid),), len(grid))
    lam, _ = lebesgue_constant(basis, grid, restrict_to)
    pen, i1 = penalized_lebesgue(basis, field, sigma, grid, restrict_to)
    eps = field.eps_star if eps is None else eps
    s = decay_exponent(basis.order, eps)
    return StabilityReport(float(sigma), gspec, lam, pen, grid[i1], eps, s, sigma + s,
                           cs.domain.r0)


@dataclass(frozen=True)
class SweepRow:
    n: int
    lebesgue: float
    penalized: float
    c0: float
    eps_star: float
    max_rho: float
    grid_points: int


SWEEP_HEADER = "n,lebesgue,penalized,c0,eps_star,max_rho,grid_points"


def sweep_csv(rows):
    out = [SWEEP_HEADER]
    for r in rows:
        out.append(f"{r.n},{r.lebesgue:.17g},{r.penalized:.17g},{r.c0:.17g},"
                   f"{r.eps_star:.17g},{r.max_rho:.17g},{r.grid_points}")
    return "\n".join(out) + "\n"


def refinement_sweep(family, m, sigma, degree, K=None, eps=None, restrict_to=None,
                     grid="uniform", per_interval=8):
    """One row per center set: size, Lebesgue and penalized constants, density diagnostics.

    If ``eps`` is given, each member's density is replaced by its smallest
    slow-growth majorant with that exponent before the penalized constant is
    taken; ``eps_star`` is the fitted exponent of the field actually used.
    """
    rows = []
    prev = 0
    for cs in family:
        if len(cs) <= prev:
            raise ValueError("family sizes must increase")
        prev = len(cs)
        order = SplineOrder(m, cs.dim)
        basis = LagrangeBasis(cs, order)
        pts, gspec = make_grid(cs, grid, per_interval)
        fld = density_field(cs, degree, K, points=pts)
        if eps is not None:
            fld = slow_growth_majorant(fld, eps)
        lam, _ = lebesgue_constant(basis, pts, restrict_to)
        pen, _ = penalized_lebesgue(basis, fld, sigma, pts, restrict_to)
        c0, _ = weak_quasi_uniformity(fld)
        rows.append(SweepRow(len(cs), lam, pen, c0, fit_slow_growth(fld),
                             float(np.max(fld.rho)), gspec.count))
    return rows
