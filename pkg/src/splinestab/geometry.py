"""Domains, center sets, regions and point-set diagnostics.

Domains are axis-aligned boxes or balls. Center sets carry a reference to
their domain so that the support margin ``r0`` and diameter ``r1`` travel
with the points.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

DEDUPE_TOL = 1e-12
FILL_RESOLUTION = 64


@dataclass(frozen=True)
class Domain:
    """Bounded region Omega.

    For ``kind="box"`` the bounds are ``lower``/``upper``; for ``kind="ball"``
    they are ``center``/``radius``. ``r0`` is the margin between the support
    of target functions and the boundary.
    """

    kind: str
    lower: tuple = ()
    upper: tuple = ()
    center: tuple = ()
    radius: float = 0.0
    r0: float | None = None

    def __post_init__(self):
        if self.kind == "box":
            lo = tuple(float(v) for v in self.lower)
            hi = tuple(float(v) for v in self.upper)
            if not lo or len(lo) != len(hi):
                raise ValueError("box needs lower and upper of equal length")
            if any(h <= l for l, h in zip(lo, hi)):
                raise ValueError("box must have upper > lower on every axis")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "ball":
            c = tuple(float(v) for v in self.center)
            if not c or self.radius <= 0:
                raise ValueError("ball needs a center and a positive radius")
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "radius", float(self.radius))
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.r0 is None:
            object.__setattr__(self, "r0", 0.1 * self._inradius())
        r0 = float(self.r0)
        object.__setattr__(self, "r0", r0)
        if not 0 < r0 < self.r1:
            raise ValueError("need 0 < r0 < r1")
        if r0 >= self._inradius():
            raise ValueError("support region (domain shrunk by r0) is empty")

    @classmethod
    def box(cls, lower, upper, r0=None):
        return cls("box", lower=tuple(np.atleast_1d(lower)),
                   upper=tuple(np.atleast_1d(upper)), r0=r0)

    @classmethod
    def ball(cls, center, radius, r0=None):
        return cls("ball", center=tuple(np.atleast_1d(center)), radius=radius, r0=r0)

    @classmethod
    def unit_interval(cls, r0=0.1):
        return cls.box([0.0], [1.0], r0=r0)

    @classmethod
    def bounding(cls, points):
        """Padded bounding box of ``points``; every point ends up in the support region."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        extent = float(np.max(hi - lo))
        pad = 0.25 * extent if extent > 0 else 0.5
        return cls.box(lo - pad, hi + pad, r0=0.5 * pad)

    @property
    def dim(self):
        return len(self.lower) if self.kind == "box" else len(self.center)

    @property
    def r1(self):
        """Diameter of the domain."""
        if self.kind == "box":
            return float(np.linalg.norm(np.subtract(self.upper, self.lower)))
        return 2.0 * self.radius

    @property
    def centroid(self):
        if self.kind == "box":
            return 0.5 * (np.array(self.lower) + np.array(self.upper))
        return np.array(self.center)

    @property
    def outer_radius(self):
        """Radius of the smallest ball about the centroid containing the domain."""
        return 0.5 * self.r1

    def _inradius(self):
        if self.kind == "box":
            return 0.5 * float(np.min(np.subtract(self.upper, self.lower)))
        return self.radius

    def contains(self, points, margin=0.0, tol=0.0):
        """Mask of points at distance >= ``margin`` inside the domain (with slack ``tol``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "box":
            lo = np.array(self.lower) + margin - tol
            hi = np.array(self.upper) - margin + tol
            return np.all((pts >= lo) & (pts <= hi), axis=1)
        r = np.linalg.norm(pts - np.array(self.center), axis=1)
        return r <= self.radius - margin + tol

    def in_support(self, points):
        return self.contains(points, margin=self.r0, tol=1e-12 * self.r1)

    def probe_grid(self, resolution=FILL_RESOLUTION):
        """Tensor grid with ``resolution`` nodes per axis, clipped to the domain."""
        if resolution < 2:
            raise ValueError("probe resolution must be >= 2")
        if self.kind == "box":
            lo, hi = self.lower, self.upper
        else:
            c = np.array(self.center)
            lo, hi = c - self.radius, c + self.radius
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        if self.kind == "ball":
            grid = grid[self.contains(grid, tol=1e-12 * self.r1)]
        return grid


@dataclass(frozen=True, eq=False)
class CenterSet:
    """Finite ordered set of distinct centers inside a domain."""

    points: np.ndarray
    domain: Domain = None
    dedupe_tol: float = DEDUPE_TOL

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("center set must be a nonempty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("center coordinates must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        dom = self.domain if self.domain is not None else Domain.bounding(pts)
        object.__setattr__(self, "domain", dom)
        if dom.dim != pts.shape[1]:
            raise ValueError("center dimension does not match domain")
        if not np.all(dom.contains(pts, tol=1e-12 * dom.r1)):
            raise ValueError("all centers must lie in the domain")
        if len(pts) > 1:
            dist, _ = cKDTree(pts).query(pts, k=2)
            if np.min(dist[:, 1]) <= self.dedupe_tol * dom.r1:
                raise ValueError("duplicate centers (closer than dedupe tolerance)")

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def support_mask(self):
        """Mask selecting the centers inside the support region (the set Xi_f)."""
        return self.domain.in_support(self.points)

    def scaled(self, factor, shift=None):
        """Dilate (and optionally translate) centers together with the domain."""
        shift = np.zeros(self.dim) if shift is None else np.asarray(shift, float)
        dom = self.domain
        if dom.kind == "box":
            lo = np.array(dom.lower) * factor + shift
            hi = np.array(dom.upper) * factor + shift
            new = Domain.box(lo, hi, r0=dom.r0 * factor)
        else:
            new = Domain.ball(np.array(dom.center) * factor + shift,
                              dom.radius * factor, r0=dom.r0 * factor)
        return CenterSet(self.points * factor + shift, new, self.dedupe_tol)


@dataclass(frozen=True)
class Region:
    """Ball, truncated ball complement, or annulus about ``center``.

    The annulus ``A(x, R, w)`` is the ball of radius ``R`` minus the ball of
    radius ``R - w``. Complements are integrated out to ``truncation``.
    """

    kind: str
    center: tuple
    radius: float
    width: float | None = None
    truncation: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if self.radius < 0 or (self.radius == 0 and self.kind != "complement"):
            raise ValueError("region radius must be positive")
        if self.kind == "annulus":
            if self.width is None or not 0 < self.width <= self.radius:
                raise ValueError("annulus requires 0 < width <= radius")
        elif self.kind == "complement":
            if self.truncation is None or self.truncation <= self.radius:
                raise ValueError("complement truncation radius must exceed its radius")
        elif self.kind != "ball":
            raise ValueError(f"unknown region kind {self.kind!r}")

    @property
    def dim(self):
        return len(self.center)

    @property
    def radial_bounds(self):
        """Inner and outer radius of the region measured from its center."""
        if self.kind == "ball":
            return 0.0, self.radius
        if self.kind == "annulus":
            return self.radius - self.width, self.radius
        return self.radius, self.truncation


def separation(centers):
    """Distance from each center to its nearest other center."""
    pts = centers.points if isinstance(centers, CenterSet) else np.atleast_2d(centers)
    if len(pts) < 2:
        raise ValueError("separation undefined for a single center")
    dist, _ = cKDTree(pts).query(pts, k=2)
    return dist[:, 1]


def fill_distance(centers, probe_resolution=FILL_RESOLUTION):
    """Largest distance from a probe-grid node to the nearest center.

    The probe grid under-approximates the supremum over the domain; the
    error is at most half the grid diagonal.
    """
    if len(centers.points) == 0:
        raise ValueError("empty center set")
    grid = centers.domain.probe_grid(probe_resolution)
    dist, _ = cKDTree(centers.points).query(grid, k=1)
    return float(np.max(dist))


@dataclass(frozen=True)
class GeneratorSpec:
    """Descriptor for :func:`generate_centers`.

    ``kind`` is one of ``uniform-grid`` (``n`` per axis), ``low-discrepancy``,
    ``graded`` (exponent ``grading`` about ``focus``) or ``clustered``.
    """

    kind: str
    n: int
    grading: float = 2.0
    focus: tuple | None = None
    clusters: int = 3
    cluster_radius: float = 0.01

    _PATTERN = re.compile(r"^\s*([a-z-]+)\s*\((.*)\)\s*$")

    @classmethod
    def parse(cls, text):
        """Parse ``"graded(n=17, g=2, focus=0)"`` style descriptors."""
        m = cls._PATTERN.match(text)
        if not m:
            raise ValueError(f"cannot parse generator descriptor {text!r}")
        kind, body = m.group(1), m.group(2)
        kw = {}
        for part in filter(None, (p.strip() for p in re.split(r",(?![^()]*\))", body))):
            if "=" not in part:
                kw["n"] = int(part)
                continue
            key, val = (s.strip() for s in part.split("=", 1))
            if key == "n":
                kw["n"] = int(val)
            elif key in ("g", "grading"):
                kw["grading"] = float(val)
            elif key == "focus":
                kw["focus"] = tuple(float(v) for v in val.strip("()").split(";" if ";" in val else " ") if v)
            elif key in ("clusters", "k"):
                kw["clusters"] = int(val)
            elif key in ("radius", "cluster_radius"):
                kw["cluster_radius"] = float(val)
            else:
                raise ValueError(f"unknown generator key {key!r}")
        if "n" not in kw:
            raise ValueError("generator descriptor needs n")
        return cls(kind, **kw)


def _dedupe(points, tol):
    keep = []
    tree = cKDTree(points)
    dropped = np.zeros(len(points), dtype=bool)
    for i in range(len(points)):
        if dropped[i]:
            continue
        keep.append(i)
        for j in tree.query_ball_point(points[i], tol):
            if j > i:
                dropped[j] = True
    return points[keep]


def _halton(n, d, seed):
    return qmc.Halton(d=d, scramble=True, seed=seed).random(n)


def _fill_domain(domain, n, seed):
    """``n`` low-discrepancy points inside the domain."""
    d = domain.dim
    if domain.kind == "box":
        u = _halton(n, d, seed)
        return np.array(domain.lower) + u * np.subtract(domain.upper, domain.lower)
    c = np.array(domain.center)
    out = np.empty((0, d))
    batch = max(2 * n, 16)
    skip = 0
    while len(out) < n:
        u = _halton(skip + batch, d, seed)[skip:]
        skip += batch
        p = c + (2 * u - 1) * domain.radius
        out = np.vstack([out, p[domain.contains(p)]])
    return out[:n]


def _graded_1d(n, g, lo, hi, focus):
    if n < 2:
        raise ValueError("graded set needs n >= 2")
    left, right = focus - lo, hi - focus
    if left <= 0:
        t = np.linspace(0.0, 1.0, n)
        return focus + right * t ** g
    if right <= 0:
        t = np.linspace(0.0, 1.0, n)
        return (focus - left * t ** g)[::-1]
    # split the points between the two sides in proportion to length^(1/g)
    wl, wr = left ** (1 / g), right ** (1 / g)
    nl = int(round((n - 1) * wl / (wl + wr)))
    nl = min(max(nl, 1), n - 2)
    nr = n - 1 - nl
    tl = np.linspace(0.0, 1.0, nl + 1)[1:]
    tr = np.linspace(0.0, 1.0, nr + 1)[1:]
    return np.concatenate([(focus - left * tl ** g)[::-1], [focus], focus + right * tr ** g])


def generate_centers(spec, domain, seed=0, degree=None, dedupe_tol=DEDUPE_TOL):
    """Deterministic center set described by ``spec`` inside ``domain``.

    ``graded`` sets place nodes at ``focus + L * t**g`` for uniformly spaced
    ``t``, so gaps grow monotonically away from the focus. ``clustered``
    sets mix a low-discrepancy background (half the points) with tight
    clusters, which makes the separation distance vary strongly.

    If ``degree`` is given, too few points to be unisolvent for polynomials
    of that degree is an error.
    """
    if isinstance(spec, str):
        spec = GeneratorSpec.parse(spec)
    d = domain.dim
    n = int(spec.n)
    if n < 1:
        raise ValueError("n must be positive")
    if spec.kind == "uniform-grid":
        if domain.kind == "box":
            axes = [np.linspace(a, b, n) for a, b in zip(domain.lower, domain.upper)]
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        else:
            pts = domain.probe_grid(n) if n >= 2 else domain.centroid[None, :]
    elif spec.kind == "low-discrepancy":
        pts = _fill_domain(domain, n, seed)
    elif spec.kind == "graded":
        if spec.grading <= 0:
            raise ValueError("grading exponent must be positive")
        focus = np.array(spec.focus if spec.focus is not None else domain.centroid, float)
        if focus.shape != (d,) or not domain.contains(focus[None, :], tol=1e-12)[0]:
            raise ValueError("focus must be a point of the domain")
        if d == 1 and domain.kind == "box":
            pts = _graded_1d(n, spec.grading, domain.lower[0], domain.upper[0], focus[0])[:, None]
        else:
            base = _fill_domain(domain, n - 1, seed)
            v = base - focus
            r = np.linalg.norm(v, axis=1)
            rmax = max(float(np.max(r)), 1e-300)
            pts = np.vstack([focus, focus + v * ((r / rmax) ** (spec.grading - 1))[:, None]])
    elif spec.kind == "clustered":
        if spec.clusters < 1 or spec.cluster_radius <= 0:
            raise ValueError("clustered needs clusters >= 1 and a positive radius")
        rng = np.random.default_rng(seed)
        n_bg = n - n // 2
        bg = _fill_domain(domain, n_bg, seed)
        margin = min(spec.cluster_radius, 0.49 * domain._inradius())
        heads = []
        while len(heads) < spec.clusters:
            c = _fill_domain(domain, 1, int(rng.integers(2**31)))[0]
            if domain.contains(c[None, :], margin=margin)[0]:
                heads.append(c)
        per = np.array_split(np.arange(n // 2), spec.clusters)
        clusters = []
        for head, idx in zip(heads, per):
            v = rng.normal(size=(len(idx), d))
            v /= np.linalg.norm(v, axis=1)[:, None]
            rad = spec.cluster_radius * rng.uniform(size=len(idx)) ** (1.0 / d)
            clusters.append(head + v * rad[:, None])
        pts = np.vstack([bg] + clusters)
    else:
        raise ValueError(f"unknown generator kind {spec.kind!r}")
    pts = pts[domain.contains(pts, tol=1e-12 * domain.r1)]
    pts = _dedupe(pts, dedupe_tol * domain.r1)
    if degree is not None and len(pts) < math.comb(degree + d, d):
        raise ValueError(
            f"{len(pts)} centers cannot be unisolvent for degree {degree} in d={d}")
    return CenterSet(pts, domain, dedupe_tol)


def read_points(path):
    """Read a whitespace-separated point file; ``#`` lines are comments."""
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in s.split()])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad coordinate") from exc
    if not rows:
        raise ValueError(f"{path}: no points")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: inconsistent dimensions")
    return np.array(rows)


def write_points(path, points, header=None):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    with Path(path).open("w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for row in pts:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
