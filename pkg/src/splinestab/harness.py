"""Convergence experiments, test functions, configuration and report files.

Configurations are INI files (``key = value`` under ``[section]`` headers).
Every report starts with ``#`` metadata lines (library version, config
hash, grid and tolerances) followed by a CSV table with 17 significant
digits, so two runs with the same configuration give identical bytes.
"""
from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve

from . import __version__
from .density import PRECISION_TOL, density_field, slow_growth_majorant
from .geometry import Domain, GeneratorSpec, generate_centers
from .interpolation import (INTERP_TOL, RANK_TOL, Interpolant, LagrangeBasis,
                            NumericalFailure, SaddleFactorization, fit)
from .kernel import SplineOrder, as_points
from .stability import make_grid, penalized_lebesgue

EXACT_TOL = 1e-9
PROBE_SAMPLES = 401
MIN_LEVELS = 3


# test functions

@dataclass(frozen=True)
class TestFunction:
    """Target function with its smoothness class and support ball.

    ``support_radius`` is ``inf`` for polynomials, which are exempt from
    the support-margin check.
    """

    name: str
    dim: int
    smoothness: str
    func: object = field(repr=False)
    center: tuple = (0.0,)
    support_radius: float = math.inf

    __test__ = False  # not a pytest class

    def __call__(self, x):
        pts = as_points(x, self.dim)
        return np.asarray(self.func(pts), dtype=float)

    def check_support(self, domain):
        """Raise unless ``supp f`` keeps distance ``r0`` from the domain boundary."""
        if not math.isfinite(self.support_radius):
            return
        c = np.array(self.center, dtype=float)[None, :]
        if not domain.contains(c, margin=self.support_radius + domain.r0, tol=1e-12)[0]:
            raise ValueError(f"support of {self.name} is closer than r0 to the boundary")


def bump(center, radius):
    """``exp(1 - 1/(1 - |z|^2))`` for ``|z| < 1`` with ``z = (x - center)/radius``; C-infinity."""
    c = np.atleast_1d(np.asarray(center, dtype=float))

    def f(pts):
        z = np.sum(((pts - c) / radius) ** 2, axis=1)
        out = np.zeros(len(pts))
        inside = z < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside]))
        return out

    return TestFunction(f"bump({_fmt_tuple(c)}, {radius:g})", len(c), "smooth", f,
                        tuple(c), float(radius))


def truncated_power(center, radius, k):
    """``(1 - |z|^2)_+^k``: compactly supported with k-1 continuous derivatives."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if k < 1:
        raise ValueError("k must be positive")

    def f(pts):
        z = np.sum(((pts - c) / radius) ** 2, axis=1)
        return np.maximum(1.0 - z, 0.0) ** k

    return TestFunction(f"truncated_power({_fmt_tuple(c)}, {radius:g}, {k})", len(c),
                        f"finite(C^{k - 1})", f, tuple(c), float(radius))


def polynomial(coefficients, dim=1):
    """Polynomial in the first coordinate, lowest degree first (``dim`` only sets the input shape)."""
    coef = np.asarray(coefficients, dtype=float)
    return TestFunction(f"poly({_fmt_tuple(coef)})", dim, "polynomial",
                        lambda pts: np.polynomial.polynomial.polyval(pts[:, 0], coef))


def _fmt_tuple(values):
    return ", ".join(f"{v:g}" for v in np.atleast_1d(values))


_CALL = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


def parse_function(text, dim=1):
    """Build a test function from e.g. ``bump(center=0.5, radius=0.4)`` or ``poly(1, 2)``."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse test function {text!r}")
    name, args = m.group(1), m.group(2)
    kw, pos = {}, []
    for part in filter(None, (a.strip() for a in re.split(r",(?![^\[]*\])", args))):
        key, eq, val = part.partition("=")
        if eq:
            kw[key.strip()] = _number_list(val)
        else:
            pos.append(float(part))
    if name == "bump":
        c = kw.get("center", [0.5] * dim)
        return bump(c, float(kw.get("radius", [0.4])[0]))
    if name == "truncated_power":
        c = kw.get("center", [0.5] * dim)
        return truncated_power(c, float(kw.get("radius", [0.4])[0]), int(kw.get("k", [3])[0]))
    if name == "poly":
        return polynomial(pos or kw.get("coef", [1.0]), dim)
    raise ValueError(f"unknown test function {name!r}")


def _number_list(text):
    return [float(v) for v in text.strip().strip("[]").replace(";", ",").split(",") if v.strip()]


# configuration

DEFAULTS = {
    "centers": {"kind": "uniform-grid", "levels": "17, 33, 65", "grading": "2",
                "focus": "", "seed": "0", "domain": "box:0,1", "r0": "0.1"},
    "spline": {"m": "2"},
    "density": {"degree": "", "K": "", "eps": ""},
    "stability": {"sigma": "0", "grid": "uniform", "per_interval": "8",
                  "restrict": "support"},
    "convergence": {"function": "bump(center=0.5, radius=0.4)", "probes": "centroid, focus",
                    "probe_samples": str(PROBE_SAMPLES)},
}


def parse_domain(text, r0=None):
    """``box:lo,hi[;lo,hi...]`` or ``ball:cx,cy,...:radius``."""
    kind, _, rest = text.strip().partition(":")
    if kind == "box":
        pairs = [_number_list(p) for p in rest.split(";")]
        if any(len(p) != 2 for p in pairs):
            raise ValueError(f"bad box domain {text!r}")
        return Domain.box([p[0] for p in pairs], [p[1] for p in pairs], r0=r0)
    if kind == "ball":
        center, _, radius = rest.rpartition(":")
        return Domain.ball(_number_list(center), float(radius), r0=r0)
    raise ValueError(f"unknown domain kind {kind!r}")


def format_domain(dom):
    if dom.kind == "box":
        return "box:" + ";".join(f"{a:.17g},{b:.17g}" for a, b in zip(dom.lower, dom.upper))
    return "ball:" + ",".join(f"{c:.17g}" for c in dom.center) + f":{dom.radius:.17g}"


class ExperimentConfig:
    """INI configuration with defaults; :attr:`digest` hashes the canonical form."""

    def __init__(self, parser):
        self._p = parser

    @classmethod
    def from_text(cls, text=""):
        p = configparser.ConfigParser(interpolation=None)
        p.optionxform = str
        p.read_dict(DEFAULTS)
        p.read_string(text)
        return cls(p)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def get(self, section, key):
        return self._p.get(section, key, fallback="").strip()

    def set(self, section, key, value):
        if not self._p.has_section(section):
            self._p.add_section(section)
        self._p.set(section, key, str(value))

    def canonical(self):
        lines = []
        for sec in sorted(self._p.sections()):
            lines.append(f"[{sec}]")
            lines += [f"{k} = {self._p.get(sec, k).strip()}" for k in sorted(self._p.options(sec))]
        return "\n".join(lines) + "\n"

    @property
    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # typed accessors
    @property
    def domain(self):
        r0 = self.get("centers", "r0")
        return parse_domain(self.get("centers", "domain"), float(r0) if r0 else None)

    @property
    def m(self):
        return int(self.get("spline", "m"))

    @property
    def degree(self):
        raw = self.get("density", "degree")
        return int(raw) if raw else self.m

    def _float_or_none(self, section, key):
        raw = self.get(section, key)
        return float(raw) if raw else None

    @property
    def K(self):
        return self._float_or_none("density", "K")

    @property
    def eps(self):
        return self._float_or_none("density", "eps")

    @property
    def sigma(self):
        return float(self.get("stability", "sigma"))

    @property
    def focus(self):
        raw = self.get("centers", "focus")
        return tuple(_number_list(raw)) if raw else None

    @property
    def levels(self):
        return [int(v) for v in _number_list(self.get("centers", "levels"))]

    def family(self):
        dom = self.domain
        kind = self.get("centers", "kind")
        seed = int(self.get("centers", "seed"))
        out = []
        for n in self.levels:
            spec = GeneratorSpec(kind, n, grading=float(self.get("centers", "grading")),
                                 focus=self.focus)
            out.append(generate_centers(spec, dom, seed=seed))
        return out

    def function(self):
        f = parse_function(self.get("convergence", "function"), self.domain.dim)
        f.check_support(self.domain)
        return f

    def probes(self):
        dom = self.domain
        pts = []
        for tok in self.get("convergence", "probes").split(","):
            tok = tok.strip()
            if not tok:
                continue
            if tok == "centroid":
                p = tuple(dom.centroid)
            elif tok == "focus":
                if self.focus is None:
                    continue
                p = self.focus
            else:
                p = tuple(_number_list(tok.replace(" ", ";")))
            if p not in pts:
                pts.append(p)
        return np.array(pts, dtype=float).reshape(-1, dom.dim)


# report files

def tolerances():
    return {"interp_tol": INTERP_TOL, "rank_tol": RANK_TOL, "precision_tol": PRECISION_TOL,
            "exact_tol": EXACT_TOL}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def render_report(header, rows, meta=None):
    """CSV text with leading ``# key=value`` metadata lines."""
    lines = [f"# splinestab {__version__}"]
    for key, val in (meta or {}).items():
        lines.append(f"# {key}={_cell(val)}")
    for key, val in tolerances().items():
        lines.append(f"# {key}={_cell(val)}")
    lines.append(",".join(header))
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_report(path, header, rows, meta=None):
    text = render_report(header, rows, meta)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return text


# convergence

@dataclass
class ConvergenceReport:
    probes: np.ndarray
    levels: list
    max_rho: np.ndarray
    probe_rho: np.ndarray
    probe_error: np.ndarray
    sup_error: np.ndarray
    orders: list
    sup_order: object
    function: str = ""

    def header(self):
        cols = ["n", "max_rho", "sup_error"]
        for k in range(len(self.probes)):
            cols += [f"rho_probe{k}", f"error_probe{k}"]
        return cols

    def rows(self):
        out = []
        for i, n in enumerate(self.levels):
            row = [n, self.max_rho[i], self.sup_error[i]]
            for k in range(len(self.probes)):
                row += [self.probe_rho[i, k], self.probe_error[i, k]]
            out.append(row)
        return out

    def meta(self):
        meta = {"function": self.function}
        for k, p in enumerate(self.probes):
            meta[f"probe{k}"] = " ".join(f"{v:.17g}" for v in p)
            meta[f"order_probe{k}"] = self.orders[k]
        meta["order_sup"] = self.sup_order
        return meta


def fit_order(rho, err, tol=EXACT_TOL):
    """Slope of ``log err`` against ``log rho``; ``"exact"`` when every error is below ``tol``."""
    rho, err = np.asarray(rho, float), np.asarray(err, float)
    if len(rho) < MIN_LEVELS:
        raise ValueError(f"order fit needs at least {MIN_LEVELS} levels")
    if np.all(err <= tol):
        return "exact"
    use = err > 0
    if use.sum() < MIN_LEVELS:
        raise ValueError("too few nonzero errors to fit an order")
    return float(np.polyfit(np.log(rho[use]), np.log(err[use]), 1)[0])


def ball_samples(center, radius, domain, count=PROBE_SAMPLES):
    """Points of ``B(center, radius)`` inside the domain (a line in 1-D, rings in 2-D)."""
    c = np.asarray(center, dtype=float)
    d = len(c)
    if d == 1:
        pts = np.linspace(c[0] - radius, c[0] + radius, count)[:, None]
    elif d == 2:
        rings = max(2, int(math.sqrt(count / 3)))
        pts = [c[None, :]]
        for k in range(1, rings + 1):
            r = radius * k / rings
            th = np.linspace(0, 2 * math.pi, 6 * k, endpoint=False)
            pts.append(c + r * np.column_stack([np.cos(th), np.sin(th)]))
        pts = np.vstack(pts)
    else:
        raise ValueError("probe balls are sampled for d <= 2 only")
    return pts[domain.contains(pts, tol=1e-12 * domain.r1)]


def _check_interpolation(s, f_vals, n):
    scale = max(1.0, float(np.max(np.abs(f_vals))))
    err = float(np.max(np.abs(s(s.centers.points) - f_vals))) / scale
    if err > INTERP_TOL:
        raise NumericalFailure(f"level n={n}: interpolation residual {err:.3e} at centers")


def run_convergence(config, family=None, func=None, probes=None):
    """Errors of surface spline interpolation along a refining family.

    The error at a probe is the largest error over ``B(probe, rho(probe))``,
    which stays meaningful when the probe is itself a center. Orders are
    fitted against ``rho(probe)``; the sup error over the evaluation grid is
    fitted against ``max rho``.
    """
    family = config.family() if family is None else family
    func = config.function() if func is None else func
    probes = config.probes() if probes is None else as_points(probes, family[0].dim)
    m, degree, K = config.m, config.degree, config.K
    nsamp = int(config.get("convergence", "probe_samples") or PROBE_SAMPLES)
    levels, max_rho, sup_err = [], [], []
    prho = np.zeros((len(family), len(probes)))
    perr = np.zeros_like(prho)
    prev = 0
    for i, cs in enumerate(family):
        n = len(cs)
        if n <= prev:
            raise ValueError("levels must strictly refine (increasing n)")
        prev = n
        try:
            order = SplineOrder(m, cs.dim)
            data = func(cs.points)
            s = fit(cs, data, order)
            _check_interpolation(s, data, n)
            grid, _ = make_grid(cs, config.get("stability", "grid") or "uniform",
                                int(config.get("stability", "per_interval") or 8))
            fld = density_field(cs, degree, K, points=probes)
        except NumericalFailure as exc:
            raise NumericalFailure(f"level n={n}: {exc}") from exc
        rho_p = fld.rho[len(cs):]
        for k, p in enumerate(probes):
            pts = ball_samples(p, rho_p[k], cs.domain, nsamp)
            perr[i, k] = float(np.max(np.abs(s(pts) - func(pts))))
        prho[i] = rho_p
        levels.append(n)
        max_rho.append(float(np.max(fld.rho)))
        sup_err.append(float(np.max(np.abs(s(grid) - func(grid)))))
    max_rho = np.array(max_rho)
    sup_err = np.array(sup_err)
    orders = [fit_order(prho[:, k], perr[:, k]) for k in range(len(probes))]
    return ConvergenceReport(probes, levels, max_rho, prho, perr, sup_err, orders,
                             fit_order(max_rho, sup_err), func.name)


# near-best comparison

def ridge_fit(centers, data, order, ridge=1e-3):
    """Member of the spline space from a ridge-regularized kernel system.

    Solves ``(Phi + ridge I) A + P c = f``, ``P^T A = 0`` in normalized
    coordinates. The moment conditions keep it inside the spline space; it
    does not interpolate unless ``ridge == 0``.
    """
    fac = SaddleFactorization(centers, order)
    n, M = len(centers), fac.P.shape[1]
    system = np.zeros((n + M, n + M))
    system[:n, :n] = fac.kernel + ridge * np.eye(n)
    system[:n, n:] = fac.P
    system[n:, :n] = fac.P.T
    rhs = np.concatenate([np.asarray(data, dtype=float), np.zeros(M)])
    try:
        x = solve(system, rhs, assume_a="sym")
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"comparison fit failed: {exc}") from exc
    return Interpolant(centers, order, x[:n], x[n:], fac.basis, condition=fac.condition)


@dataclass(frozen=True)
class NearBestReport:
    ratio: float
    bound: float
    interp_error: float
    comparison_error: float
    status: str

    @property
    def passed(self):
        return self.status == "0/0: exact" or self.ratio <= self.bound * (1 + 1e-12)


def near_best_check(centers, func, m, sigma=0.0, degree=None, K=None, eps=None,
                    comparison=None, grid=None, ridge=1e-3, restrict_to="all"):
    """Weighted interpolation error against a computable comparison spline.

    Reports ``||(f - I f)/rho^sigma|| / ||(f - s_cmp)/rho^sigma||`` over the
    grid, with the bound ``1 + L_{sigma,rho}`` measured on the same grid.
    ``s_cmp`` defaults to :func:`ridge_fit`; it stands in for the best
    approximation, which is not computed.
    """
    order = SplineOrder(m, centers.dim)
    degree = m if degree is None else degree
    if grid is None:
        grid, _ = make_grid(centers)
    grid = as_points(grid, centers.dim)
    fld = density_field(centers, degree, K, points=grid)
    if eps is not None:
        fld = slow_growth_majorant(fld, eps)
    data = func(centers.points)
    basis = LagrangeBasis(centers, order)
    s = fit(centers, data, order, basis.factorization)
    cmp_ = ridge_fit(centers, data, order, ridge) if comparison is None else comparison
    n = len(centers)
    w = fld.rho[n:] ** sigma
    fg = func(grid)
    e_int = float(np.max(np.abs(fg - s(grid)) / w))
    e_cmp = float(np.max(np.abs(fg - cmp_(grid)) / w))
    L, _ = penalized_lebesgue(basis, fld, sigma, grid, restrict_to)
    if e_int <= EXACT_TOL and e_cmp <= EXACT_TOL:
        return NearBestReport(math.nan, 1.0 + L, e_int, e_cmp, "0/0: exact")
    if e_cmp == 0.0:
        return NearBestReport(math.inf, 1.0 + L, e_int, e_cmp, "comparison exact")
    ratio = e_int / e_cmp
    status = "ok" if ratio <= (1.0 + L) * (1 + 1e-12) else "bound violated"
    return NearBestReport(ratio, 1.0 + L, e_int, e_cmp, status)
