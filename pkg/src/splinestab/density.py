"""Local density parameters from stable local polynomial reproductions.

At a point ``alpha`` the density ``rho(alpha)`` is the smallest radius such
that the centers inside ``B(alpha, rho)`` are unisolvent for polynomials of
degree ``ell`` and the minimum-norm reproduction weights ``a(xi, alpha)``
satisfy ``sum |a| <= K``. Candidate radii are the sorted distances from
``alpha`` to the centers, inflated by ``RADIUS_INFLATION``.

Unlike the bare definition, a single center sitting at ``alpha`` is never
accepted as a reproduction: the captured set must be unisolvent.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _backend
from .geometry import CenterSet, Region, separation
from .interpolation import RANK_TOL
from .kernel import PolyBasis, as_points, poly_dim

logger = logging.getLogger(__name__)

RADIUS_INFLATION = 1e-9
PRECISION_TOL = 1e-9
PAIR_SLACK = 1e-12
DIAGNOSTIC_SAMPLE = 1500
CHUNK = 4096


def default_stability(degree, dim):
    return 4.0 * poly_dim(degree, dim)


def bulk_gamma(eps, r0):
    """Smallness threshold ``(eps * r0**-eps)**(1 / (1 - eps))`` for rho at a center."""
    if not 0 < eps < 1:
        return math.nan
    return (eps * r0 ** (-eps)) ** (1.0 / (1.0 - eps))


@dataclass(frozen=True)
class ReproductionWitness:
    alpha: np.ndarray
    radius: float
    indices: np.ndarray
    coefficients: np.ndarray
    degree: int
    stability: float
    precision_error: float

    feasible = True

    def __bool__(self):
        return True

    def check(self, centers, K, tol=PRECISION_TOL):
        """Machine check of the support, precision and stability conditions."""
        pts = centers.points[self.indices]
        support = bool(np.all(np.linalg.norm(pts - self.alpha, axis=1) <= self.radius))
        basis = PolyBasis(self.degree, centers.dim, tuple(self.alpha), self.radius)
        lhs = basis.vandermonde(pts).T @ self.coefficients
        rhs = basis.vandermonde(self.alpha[None, :])[0]
        precision = bool(np.max(np.abs(lhs - rhs)) <= tol)
        stability = bool(np.sum(np.abs(self.coefficients)) <= K)
        return support and precision and stability


@dataclass(frozen=True)
class Infeasible:
    alpha: np.ndarray
    radius: float
    reason: str

    feasible = False

    def __bool__(self):
        return False


def _try_batch(centers_pts, alphas, radii, idx_lists, degree, K):
    """Minimum-norm reproductions for points sharing one capture count.

    Returns (ok mask, coefficient array, stability, precision error, reason codes).
    """
    g, cnt = idx_lists.shape
    d = centers_pts.shape[1]
    M = poly_dim(degree, d)
    Z = (centers_pts[idx_lists] - alphas[:, None, :]) / radii[:, None, None]
    unit = PolyBasis(degree, d)
    V = unit.vandermonde(Z.reshape(-1, d)).reshape(g, cnt, M)
    rhs = np.zeros(M)
    rhs[0] = 1.0
    reason = np.zeros(g, dtype=int)
    if cnt < M:
        reason[:] = 1
        return np.zeros(g, bool), np.zeros((g, cnt)), np.full(g, np.inf), np.full(g, np.inf), reason
    sv = np.linalg.svd(V, compute_uv=False)
    full_rank = sv[:, -1] > RANK_TOL * sv[:, 0]
    Vt = np.swapaxes(V, 1, 2)
    coef = np.linalg.pinv(Vt) @ rhs
    prec = np.max(np.abs(np.einsum("gmc,gc->gm", Vt, coef) - rhs), axis=1)
    stab = np.sum(np.abs(coef), axis=1)
    reason[~full_rank] = 1
    reason[full_rank & (prec > PRECISION_TOL)] = 2
    reason[full_rank & (prec <= PRECISION_TOL) & (stab > K)] = 3
    return reason == 0, coef, stab, prec, reason


_REASONS = {1: "not unisolvent", 2: "precision", 3: "stability"}


def local_reproduction(centers, alpha, degree, K, radius):
    """Reproduction at ``alpha`` using the centers within ``radius``, or :class:`Infeasible`."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    alpha = as_points(alpha, centers.dim)[0]
    dist = np.linalg.norm(centers.points - alpha, axis=1)
    idx = np.flatnonzero(dist <= radius)
    idx = idx[np.argsort(dist[idx], kind="stable")]
    if len(idx) == 0:
        return Infeasible(alpha, radius, "empty")
    ok, coef, stab, prec, reason = _try_batch(
        centers.points, alpha[None, :], np.array([radius]), idx[None, :], degree, K)
    if not ok[0]:
        return Infeasible(alpha, radius, _REASONS[int(reason[0])])
    return ReproductionWitness(alpha, float(radius), idx, coef[0], degree,
                               float(stab[0]), float(prec[0]))


def _density_chunk(centers, alphas, degree, K, r1):
    pts = centers.points
    n = len(pts)
    M = poly_dim(degree, centers.dim)
    D = np.linalg.norm(alphas[:, None, :] - pts[None, :, :], axis=2)
    order = np.argsort(D, axis=1, kind="stable")
    Ds = np.take_along_axis(D, order, axis=1)
    P = len(alphas)
    rho = np.full(P, np.nan)
    stab = np.full(P, np.nan)
    prec = np.full(P, np.nan)
    idx_out = [None] * P
    coef_out = [None] * P
    target = np.full(P, max(M, 1))
    active = np.arange(P)
    while len(active):
        if np.any(target[active] > n):
            bad = active[target[active] > n][0]
            raise ValueError(f"no feasible radius up to r1 at point {alphas[bad].tolist()}")
        base = Ds[active, target[active] - 1]
        radius = base * (1.0 + RADIUS_INFLATION)
        zero = radius <= 0
        target[active[zero]] += 1
        live = active[~zero]
        radius = radius[~zero]
        if np.any(radius > r1 * (1.0 + RADIUS_INFLATION)):
            bad = live[radius > r1 * (1.0 + RADIUS_INFLATION)][0]
            raise ValueError(f"no feasible radius up to r1 at point {alphas[bad].tolist()}")
        counts = np.sum(Ds[live] <= radius[:, None], axis=1)
        # zero candidate radii (alpha on a center) move on to the next capture event
        still = list(active[zero])
        for cnt in np.unique(counts):
            sel = counts == cnt
            who = live[sel]
            ok, coef, st, pr, _ = _try_batch(pts, alphas[who], radius[sel],
                                             order[who, :cnt], degree, K)
            for k, i in enumerate(who):
                if ok[k]:
                    rho[i] = radius[sel][k]
                    stab[i], prec[i] = st[k], pr[k]
                    idx_out[i] = order[i, :cnt].copy()
                    coef_out[i] = coef[k].copy()
                else:
                    target[i] = cnt + 1
                    still.append(i)
        active = np.array(sorted(still), dtype=int)
    return rho, stab, prec, idx_out, coef_out


@dataclass(eq=False)
class DensityField:
    """Density values at a point list, with witnesses and growth diagnostics.

    The first ``len(center_index)`` entries of ``center_index`` map each
    center to its row in ``points`` (``-1`` if the center is absent).
    """

    points: np.ndarray
    rho: np.ndarray
    centers: CenterSet | None = None
    degree: int | None = None
    K: float | None = None
    center_index: np.ndarray | None = None
    witness_indices: list = field(default_factory=list)
    witness_coefs: list = field(default_factory=list)
    stability: np.ndarray | None = None
    precision: np.ndarray | None = None
    diagnostic_rows: np.ndarray | None = None

    @classmethod
    def from_values(cls, points, rho):
        """Field with explicit density values and no witnesses (for diagnostics)."""
        rho = np.asarray(rho, dtype=float)
        pts = np.asarray(points, dtype=float)
        pts = pts[:, None] if pts.ndim == 1 else pts
        if np.any(rho <= 0):
            raise ValueError("density values must be positive")
        return cls(pts, rho)

    def __len__(self):
        return len(self.rho)

    def witness(self, i):
        return ReproductionWitness(self.points[i], float(self.rho[i]), self.witness_indices[i],
                                   self.witness_coefs[i], self.degree, float(self.stability[i]),
                                   float(self.precision[i]))

    def check_witnesses(self):
        """Indices of stored witnesses failing the machine check (empty when all valid)."""
        return [i for i in range(len(self)) if not self.witness(i).check(self.centers, self.K)]

    def rho_at_centers(self):
        if self.center_index is None or np.any(self.center_index < 0):
            raise ValueError("density not available at every center")
        return self.rho[self.center_index]

    def _sample(self):
        if self.diagnostic_rows is not None:
            return self.diagnostic_rows
        return np.arange(len(self))

    def pair_arrays(self):
        rows = self._sample()
        X = self.points[rows]
        r = self.rho[rows]
        dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
        return r, dist

    @property
    def eps_star(self):
        return fit_slow_growth(self)

    def diagnostics(self, r0=None):
        eps = self.eps_star
        tau = 1.0 / eps - 1.0 if eps > 0 else math.inf
        csm = fit_self_majorization(self, tau) if eps > 0 else 0.0
        out = {"eps_star": eps, "tau": tau, "C_sm": csm,
               "diagnostic_points": int(len(self._sample()))}
        if self.centers is not None and len(self.centers) > 1 and self.center_index is not None:
            out["c0"] = weak_quasi_uniformity(self)[0]
        if r0 is not None:
            out["gamma"] = bulk_gamma(eps, r0)
        return out

    def to_text(self, r0=None):
        lines = ["# splinestab density field"]
        if self.degree is not None:
            lines.append(f"# degree={self.degree} K={self.K:.17g}")
        for key, val in self.diagnostics(r0).items():
            lines.append(f"# {key}={val:.17g}" if isinstance(val, float) else f"# {key}={val}")
        d = self.points.shape[1]
        cols = [f"x{i}" for i in range(d)] + ["rho", "witness_radius", "stability"]
        lines.append(",".join(cols))
        stab = self.stability if self.stability is not None else np.full(len(self), np.nan)
        for p, r, s in zip(self.points, self.rho, stab):
            lines.append(",".join(f"{v:.17g}" for v in (*p, r, r, s)))
        return "\n".join(lines) + "\n"


def density_field(centers, degree, K=None, points=None, include_centers=True):
    """Density at the centers (first) and at ``points``, with stored witnesses."""
    K = default_stability(degree, centers.dim) if K is None else float(K)
    extra = np.zeros((0, centers.dim)) if points is None else as_points(points, centers.dim)
    all_pts = np.vstack([centers.points, extra]) if include_centers else extra
    if len(all_pts) == 0:
        raise ValueError("no evaluation points")
    r1 = centers.domain.r1
    chunks = [all_pts[i:i + CHUNK] for i in range(0, len(all_pts), CHUNK)]
    workers = min(_backend.num_threads(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _density_chunk(centers, a, degree, K, r1), chunks))
    else:
        parts = [_density_chunk(centers, a, degree, K, r1) for a in chunks]
    rho = np.concatenate([p[0] for p in parts])
    stab = np.concatenate([p[1] for p in parts])
    prec = np.concatenate([p[2] for p in parts])
    idx = [w for p in parts for w in p[3]]
    coefs = [w for p in parts for w in p[4]]
    cidx = np.arange(len(centers)) if include_centers else np.full(len(centers), -1)
    rows = None
    if len(all_pts) > DIAGNOSTIC_SAMPLE + len(centers):
        # all centers plus an evenly strided subsample of the remaining points
        rest = np.arange(len(centers) if include_centers else 0, len(all_pts))
        step = max(1, len(rest) // DIAGNOSTIC_SAMPLE)
        rows = np.concatenate([np.arange(len(centers)) if include_centers else [], rest[::step]]).astype(int)
    return DensityField(all_pts, rho, centers, degree, K, cidx, idx, coefs, stab, prec, rows)


@dataclass(frozen=True)
class GrowthCheck:
    passed: bool
    violations: np.ndarray

    def __bool__(self):
        return self.passed


def _slow_growth_violations(field, eps):
    r, dist = field.pair_arrays()
    rx = r[:, None]
    rhs = rx * (1.0 + dist / rx) ** (1.0 - eps)
    bad = r[None, :] > rhs * (1.0 + PAIR_SLACK)
    return np.argwhere(bad)


def check_slow_growth(field, eps):
    """Check ``rho(a) <= rho(x) (1 + |x - a| / rho(x))**(1 - eps)`` on all ordered pairs.

    Violations are returned as rows ``(i_x, i_alpha)`` of the diagnostic sample.
    """
    if len(field) < 2:
        raise ValueError("slow growth needs at least two points")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    v = _slow_growth_violations(field, eps)
    return GrowthCheck(len(v) == 0, v)


def fit_slow_growth(field, tol=1e-3):
    """Largest eps in (0, 1] passing the slow-growth check, by bisection; 0 if none."""
    if len(_slow_growth_violations(field, 1.0)) == 0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if len(_slow_growth_violations(field, mid)) == 0:
            lo = mid
        else:
            hi = mid
    return lo


def check_self_majorization(field, tau, C_sm):
    """Check ``rho(y) >= C_sm rho(x) (1 + |x - y| / rho(x))**(-tau)`` on all ordered pairs."""
    r, dist = field.pair_arrays()
    rx = r[:, None]
    rhs = C_sm * rx * (1.0 + dist / rx) ** (-tau)
    bad = r[None, :] < rhs * (1.0 - PAIR_SLACK)
    v = np.argwhere(bad)
    return GrowthCheck(len(v) == 0, v)


def fit_self_majorization(field, tau):
    """Largest constant for which self-majorization of order ``tau`` holds (<= 1)."""
    r, dist = field.pair_arrays()
    rx = r[:, None]
    ratio = r[None, :] / rx * (1.0 + dist / rx) ** tau
    return float(np.min(ratio))


def weak_quasi_uniformity(field):
    """Ratio ``max rho(xi) / q(xi)`` over the centers and the index attaining it."""
    if field.centers is None or len(field.centers) < 2:
        raise ValueError("weak quasi-uniformity needs at least two centers")
    ratio = field.rho_at_centers() / separation(field.centers)
    i = int(np.argmax(ratio))
    return float(ratio[i]), i


@dataclass(frozen=True)
class NormingEstimate:
    kappa: float
    argmax: np.ndarray | None
    grid_points: int
    lower_bound: bool = True


def _ball_grid(ball, resolution):
    d = ball.dim
    c = np.array(ball.center)
    axes = [np.linspace(-1, 1, resolution)] * d
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    g = g[np.linalg.norm(g, axis=1) <= 1 + 1e-12]
    if d > 1:
        # boundary samples: polynomial maxima over a ball sit on the sphere
        u = np.random.default_rng(12345).normal(size=(resolution * 8, d))
        g = np.vstack([g, u / np.linalg.norm(u, axis=1)[:, None]])
    return c + ball.radius * g


def _norming(upsilon, ball, degree, trials, seed, resolution):
    d = ball.dim
    basis = PolyBasis(degree, d, ball.center, ball.radius)
    V = basis.vandermonde(upsilon)
    M = len(basis)
    if len(upsilon) < M or np.linalg.matrix_rank(V, tol=RANK_TOL * np.linalg.norm(V, 2)) < M:
        return NormingEstimate(math.inf, None, 0)
    grid = _ball_grid(ball, resolution)
    G = basis.vandermonde(grid)
    A_ub = np.vstack([V, -V])
    b_ub = np.ones(2 * len(V))
    best, arg = 0.0, None
    for z, row in zip(grid, G):
        res = linprog(-row, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * M, method="highs")
        if res.status == 0 and -res.fun > best:
            best, arg = -res.fun, z
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        c = rng.normal(size=M)
        on_set = np.max(np.abs(V @ c))
        if on_set > 0:
            val = np.max(np.abs(G @ c)) / on_set
            if val > best:
                best, arg = val, grid[int(np.argmax(np.abs(G @ c)))]
    return NormingEstimate(float(best), arg, len(grid))


def estimate_norming_constant(points, ball, degree, trials=100, seed=0, resolution=41,
                              leave_one_out=False):
    """Lower estimate of the norming constant of ``points`` for a ball.

    For each node ``z`` of a grid on the ball, the largest ``|p(z)|`` over
    polynomials bounded by one on ``points`` is found by linear programming;
    random polynomials are tried as well. With ``leave_one_out`` each point
    is removed in turn, the degree drops by one, and the worst estimate is
    returned.
    """
    if ball.kind != "ball":
        raise ValueError("norming constants are estimated on balls")
    ups = as_points(points, ball.dim)
    if not leave_one_out:
        return _norming(ups, ball, degree, trials, seed, resolution)
    if degree < 1:
        raise ValueError("leave-one-out needs degree >= 1")
    worst = NormingEstimate(0.0, None, 0)
    for i in range(len(ups)):
        est = _norming(np.delete(ups, i, axis=0), ball, degree - 1, trials, seed, resolution)
        if est.kappa > worst.kappa:
            worst = est
    return worst


def _shrink_radius(v, t, eps):
    """Solve ``r**eps * (r + t)**(1 - eps) = v`` for ``r`` in ``(0, v]`` (vectorized)."""
    lo = np.zeros_like(v)
    hi = np.array(v, dtype=float)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        big = mid ** eps * (mid + t) ** (1.0 - eps) >= v
        hi = np.where(big, mid, hi)
        lo = np.where(big, lo, mid)
    return hi


def slow_growth_majorant(field, eps, max_iter=500):
    """Smallest pointwise raise of ``rho`` satisfying slow growth with ``eps`` on the point list.

    Raising ``rho`` keeps every stored witness valid (its support only
    widens), so the result is again a density field for the same centers.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if len(field) > 5000:
        raise ValueError("majorant is computed on all pairs; use at most 5000 points")
    X = field.points
    dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    rho = field.rho.copy()
    for _ in range(max_iter):
        need = _shrink_radius(np.broadcast_to(rho[None, :], dist.shape), dist, eps)
        new = np.maximum(rho, need.max(axis=1))
        if np.all(new <= rho * (1.0 + 1e-13)):
            break
        rho = new
    return DensityField(field.points, rho, field.centers, field.degree, field.K,
                        field.center_index, field.witness_indices, field.witness_coefs,
                        field.stability, field.precision, field.diagnostic_rows)
