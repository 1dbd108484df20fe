"""Surface spline interpolation.

The interpolant ``sum_j A_j phi(x - xi_j) + p(x)`` with ``p`` of degree
``m - 1`` and moment conditions ``P^T A = 0`` solves the bordered system::

    [ Phi  P ] [A]   [f]
    [ P^T  0 ] [c] = [0]

Both blocks are assembled in coordinates where the working region (the
domain's circumscribed ball) has radius one. The system is factored once
with a pivoted symmetric-indefinite (Bunch-Kaufman) decomposition and the
factorization is reused for every right-hand side.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from . import _backend
from .geometry import CenterSet, Domain
from .kernel import PolyBasis, SplineOrder, as_points, is_single_point, phi_partial

logger = logging.getLogger(__name__)

INTERP_TOL = 1e-9
COND_WARN = 1e10
COND_FAIL = 1e14
RANK_TOL = 1e-10


class NumericalFailure(RuntimeError):
    """Base class for failures the caller cannot fix by retrying."""


class NotUnisolventError(NumericalFailure):
    def __init__(self, report):
        self.report = report
        super().__init__(
            f"center set is not unisolvent for degree {report.degree}: "
            f"rank {report.rank} < {report.required}")


class IllConditionedError(NumericalFailure):
    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"saddle system ill-conditioned: condition estimate {condition:.3e}")


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class UnisolvencyReport:
    degree: int
    rank: int
    required: int
    singular_values: np.ndarray
    threshold: float

    @property
    def unisolvent(self):
        return self.rank == self.required

    def __bool__(self):
        return self.unisolvent


def working_basis(centers, degree):
    dom = centers.domain
    return PolyBasis(degree, centers.dim, tuple(dom.centroid), dom.outer_radius)


def check_unisolvent(centers, degree):
    """Numerical rank test of the degree-``degree`` Vandermonde matrix.

    The rank counts singular values above ``RANK_TOL`` times the largest.
    """
    if not isinstance(centers, CenterSet):
        centers = CenterSet(centers)
    basis = working_basis(centers, degree)
    V = basis.vandermonde(centers.points)
    sv = np.linalg.svd(V, compute_uv=False)
    thresh = RANK_TOL * (sv[0] if len(sv) else 0.0)
    rank = int(np.sum(sv > thresh))
    return UnisolvencyReport(degree, rank, len(basis), sv, thresh)


class SaddleFactorization:
    """Bunch-Kaufman factorization of the bordered kernel system."""

    def __init__(self, centers, order):
        if centers.dim != order.d:
            raise ValueError("center dimension does not match spline order")
        report = check_unisolvent(centers, order.poly_degree)
        if not report:
            raise NotUnisolventError(report)
        self.centers = centers
        self.order = order
        self.basis = working_basis(centers, order.poly_degree)
        self.scaled = self.basis.normalize(centers.points)
        n, M = len(centers), len(self.basis)
        self.kernel = _backend.kernel_matrix(self.scaled, self.scaled,
                                             order.power, order.even_dim)
        P = self.basis.vandermonde(centers.points)
        system = np.zeros((n + M, n + M))
        system[:n, :n] = self.kernel
        system[:n, n:] = P
        system[n:, :n] = P.T
        self.P = P
        anorm = float(np.max(np.abs(system).sum(axis=0)))
        lu, ipiv, info = lapack.dsytrf(system, lower=0)
        if info > 0:
            raise IllConditionedError(math.inf)
        rcond, info = lapack.dsycon(lu, ipiv, anorm, lower=0)
        self.condition = math.inf if rcond == 0 else 1.0 / rcond
        if self.condition > COND_FAIL:
            raise IllConditionedError(self.condition)
        if self.condition > COND_WARN:
            warnings.warn(f"condition estimate {self.condition:.3e} exceeds {COND_WARN:.0e}",
                          IllConditionedWarning, stacklevel=3)
        self._lu, self._ipiv = lu, ipiv

    def solve(self, data):
        """Kernel and polynomial coefficients for one or more data columns."""
        f = np.asarray(data, dtype=float)
        single = f.ndim == 1
        f = f.reshape(len(self.centers), -1)
        rhs = np.vstack([f, np.zeros((len(self.basis), f.shape[1]))])
        x, info = lapack.dsytrs(self._lu, self._ipiv, rhs, lower=0)
        if info != 0:
            raise NumericalFailure(f"dsytrs failed with info={info}")
        A, c = x[: len(self.centers)], x[len(self.centers):]
        return (A[:, 0], c[:, 0]) if single else (A, c)


def _poly_part(V, coef):
    # fixed column order so single-point and batch evaluation agree exactly
    acc = np.zeros(V.shape[0])
    for j in range(V.shape[1]):
        acc = acc + V[:, j] * coef[j]
    return acc


@dataclass(eq=False)
class Interpolant:
    """Element of the surface spline space on a center set."""

    centers: CenterSet
    order: SplineOrder
    kernel_coef: np.ndarray
    poly_coef: np.ndarray
    basis: PolyBasis
    condition: float = float("nan")
    residual: float = 0.0
    side_residual: float = 0.0

    def __post_init__(self):
        self.kernel_coef = np.asarray(self.kernel_coef, dtype=float)
        self.poly_coef = np.asarray(self.poly_coef, dtype=float)
        if self.kernel_coef.shape != (len(self.centers),):
            raise ValueError("one kernel coefficient per center required")
        if self.poly_coef.shape != (len(self.basis),):
            raise ValueError("polynomial coefficient count mismatch")

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        pts = as_points(x, self.order.d)
        z = self.basis.normalize(pts)
        zc = self.basis.normalize(self.centers.points)
        vals = _backend.kernel_apply(z, zc, self.order.power, self.order.even_dim,
                                     self.kernel_coef)
        vals = vals + _poly_part(self.basis.vandermonde(pts), self.poly_coef)
        return float(vals[0]) if is_single_point(x, self.order.d) else vals

    def partial(self, beta, x):
        """``D^beta`` of the interpolant; raises SingularPointError at kernel singularities."""
        beta = tuple(beta)
        pts = as_points(x, self.order.d)
        z = self.basis.normalize(pts)
        zc = self.basis.normalize(self.centers.points)
        diff = (z[:, None, :] - zc[None, :, :]).reshape(-1, self.order.d)
        K = phi_partial(self.order, diff, beta).reshape(len(z), len(zc))
        vals = K @ self.kernel_coef / self.basis.scale ** sum(beta)
        vals = vals + self.basis.vandermonde(pts, beta) @ self.poly_coef
        return float(vals[0]) if is_single_point(x, self.order.d) else vals

    def moments(self):
        """Moment-condition residuals ``P^T A`` in the normalized basis."""
        return self.basis.vandermonde(self.centers.points).T @ self.kernel_coef

    def to_text(self):
        dom = self.centers.domain
        lines = ["# splinestab interpolant", f"d {self.order.d}", f"m {self.order.m}",
                 f"n {len(self.centers)}"]
        if dom.kind == "box":
            lines.append("domain box " + _fmt(dom.lower) + " | " + _fmt(dom.upper) + f" | {dom.r0:.17g}")
        else:
            lines.append("domain ball " + _fmt(dom.center) + f" | {dom.radius:.17g} | {dom.r0:.17g}")
        lines.append("basis_center " + _fmt(self.basis.center))
        lines.append(f"basis_scale {self.basis.scale:.17g}")
        lines.append("centers")
        lines += [_fmt(p) for p in self.centers.points]
        lines.append("kernel_coef")
        lines += [f"{a:.17g}" for a in self.kernel_coef]
        lines.append("poly_coef")
        lines += [f"{c:.17g}" for c in self.poly_coef]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        head = {}
        i = 0
        while rows[i] != "centers":
            key, _, val = rows[i].partition(" ")
            head[key] = val
            i += 1
        d, m, n = int(head["d"]), int(head["m"]), int(head["n"])
        kind, _, rest = head["domain"].partition(" ")
        parts = [p.split() for p in rest.split("|")]
        if kind == "box":
            dom = Domain.box([float(v) for v in parts[0]], [float(v) for v in parts[1]],
                             r0=float(parts[2][0]))
        else:
            dom = Domain.ball([float(v) for v in parts[0]], float(parts[1][0]),
                              r0=float(parts[2][0]))
        pts = np.array([[float(v) for v in rows[i + 1 + k].split()] for k in range(n)])
        i += 1 + n
        assert rows[i] == "kernel_coef"
        A = np.array([float(v) for v in rows[i + 1: i + 1 + n]])
        i += 1 + n
        assert rows[i] == "poly_coef"
        c = np.array([float(v) for v in rows[i + 1:]])
        basis = PolyBasis(m - 1, d, tuple(float(v) for v in head["basis_center"].split()),
                          float(head["basis_scale"]))
        return cls(CenterSet(pts, dom), SplineOrder(m, d), A, c, basis)


def _fmt(values):
    return " ".join(f"{v:.17g}" for v in np.atleast_1d(values))


def _as_centers(centers):
    return centers if isinstance(centers, CenterSet) else CenterSet(centers)


def fit(centers, data, order, factorization=None):
    """Surface spline interpolant to ``data`` at ``centers``."""
    centers = _as_centers(centers)
    data = np.asarray(data, dtype=float)
    if data.shape != (len(centers),):
        raise ValueError("need one datum per center")
    fac = factorization or SaddleFactorization(centers, order)
    A, c = fac.solve(data)
    s = Interpolant(centers, order, A, c, fac.basis, condition=fac.condition)
    scale = max(1.0, float(np.max(np.abs(data))))
    s.residual = float(np.max(np.abs(s.evaluate(centers.points) - data))) / scale
    s.side_residual = float(np.max(np.abs(s.moments()))) / max(1.0, float(np.sum(np.abs(A))))
    if s.residual > INTERP_TOL or s.side_residual > INTERP_TOL:
        logger.warning("interpolation residual %.2e / moment residual %.2e above %.0e",
                       s.residual, s.side_residual, INTERP_TOL)
    return s


class LagrangeBasis:
    """All Lagrange functions of a center set from one factorization.

    Column ``j`` of :attr:`kernel_coef` / :attr:`poly_coef` holds the
    coefficients of the Lagrange function centered at the ``j``-th center.
    """

    def __init__(self, centers, order):
        self.centers = _as_centers(centers)
        self.order = order
        self.factorization = SaddleFactorization(self.centers, order)
        self.basis = self.factorization.basis
        n = len(self.centers)
        self.kernel_coef, self.poly_coef = self.factorization.solve(np.eye(n))

    @property
    def condition(self):
        return self.factorization.condition

    def __len__(self):
        return len(self.centers)

    def values(self, x):
        """Matrix of Lagrange function values, one row per point, one column per center."""
        pts = as_points(x, self.order.d)
        K = _backend.kernel_matrix(self.basis.normalize(pts), self.factorization.scaled,
                                   self.order.power, self.order.even_dim)
        return K @ self.kernel_coef + self.basis.vandermonde(pts) @ self.poly_coef

    def function(self, j):
        return Interpolant(self.centers, self.order, self.kernel_coef[:, j].copy(),
                           self.poly_coef[:, j].copy(), self.basis,
                           condition=self.condition)

    def apply(self, data):
        """Interpolant ``sum_j data_j chi_j``."""
        data = np.asarray(data, dtype=float)
        return Interpolant(self.centers, self.order, self.kernel_coef @ data,
                           self.poly_coef @ data, self.basis, condition=self.condition)

    def kronecker_error(self):
        return float(np.max(np.abs(self.values(self.centers.points) - np.eye(len(self)))))


def lagrange_basis(centers, order):
    return LagrangeBasis(centers, order)


def native_energy(s, tol=INTERP_TOL):
    """Kernel quadratic form of ``s``, proportional to its squared order-m seminorm.

    Returns ``sign * R**(d - 2m) * A^T Phi A`` where ``Phi`` is the kernel
    matrix in normalized coordinates and ``R`` the normalization radius; the
    ratio to the true squared seminorm is a positive constant depending only
    on ``(m, d)``.
    """
    A = s.kernel_coef
    total = float(np.sum(np.abs(A)))
    if total == 0.0:
        return 0.0
    # polynomial data leaves roundoff-level coefficients; scale against the whole solution
    scale = total + float(np.sum(np.abs(s.poly_coef)))
    if float(np.max(np.abs(s.moments()))) > tol * scale:
        raise ValueError("moment conditions violated; energy undefined off the subspace")
    z = s.basis.normalize(s.centers.points)
    Phi = _backend.kernel_matrix(z, z, s.order.power, s.order.even_dim)
    q = float(A @ (Phi @ A))
    return s.order.energy_sign * q * s.basis.scale ** (s.order.d - 2 * s.order.m)
