import math

import numpy as np
import pytest

from splinestab.geometry import Domain, Region, generate_centers
from splinestab.interpolation import LagrangeBasis, fit
from splinestab.kernel import SplineOrder
from splinestab.seminorm import (PartialsFunction, QuadratureSpec, TailExhausted,
                                 UnsupportedDimension, bulk_ratio, sobolev_seminorm,
                                 tail_profile, tail_ratio)

UNIT = Domain.unit_interval()


def square():
    return PartialsFunction(1, {(2,): lambda p: np.full(len(p), 2.0), (1,): lambda p: 2 * p[:, 0]})


def radial_square():
    two = lambda p: np.full(len(p), 2.0)
    zero = lambda p: np.zeros(len(p))
    return PartialsFunction(2, {(2, 0): two, (0, 2): two, (1, 1): zero})


def cubic_lagrange(n=11, j=5):
    cs = generate_centers(f"uniform-grid(n={n})", UNIT)
    return LagrangeBasis(cs, SplineOrder(2, 1)).function(j), cs


class TestSeminorm:
    def test_square_on_interval(self):
        s = sobolev_seminorm(square(), 2, Region("ball", (0.5,), 0.5))
        assert s.value == pytest.approx(2.0, rel=1e-12)

    def test_radial_square_disc(self):
        s = sobolev_seminorm(radial_square(), 2, Region("ball", (0.0, 0.0), 1.0))
        assert s.value == pytest.approx(math.sqrt(8 * math.pi), rel=1e-6)

    def test_polynomial_vanishes(self):
        cs = generate_centers("uniform-grid(n=6)", UNIT)
        s = fit(cs, 3 * cs.points[:, 0] - 1, SplineOrder(2, 1))
        assert sobolev_seminorm(s, 2, Region("ball", (0.5,), 2.0)).value <= 1e-9

    def test_additivity(self):
        chi, _ = cubic_lagrange()
        whole = sobolev_seminorm(chi, 2, Region("ball", (0.5,), 0.6)).value ** 2
        inner = sobolev_seminorm(chi, 2, Region("ball", (0.5,), 0.25)).value ** 2
        ring = sobolev_seminorm(chi, 2, Region("annulus", (0.5,), 0.6, width=0.35)).value ** 2
        assert inner + ring == pytest.approx(whole, rel=1e-9)

    def test_scale_equivariance_1d(self):
        chi, cs = cubic_lagrange()
        lam = 2.5
        big = LagrangeBasis(cs.scaled(lam, np.zeros(1)), SplineOrder(2, 1)).function(5)
        a = sobolev_seminorm(chi, 2, Region("ball", (0.5,), 0.3)).value
        b = sobolev_seminorm(big, 2, Region("ball", (0.5 * lam,), 0.3 * lam)).value
        assert b == pytest.approx(lam ** (0.5 - 2) * a, rel=1e-8)

    def test_quadrature_converges(self):
        cs = generate_centers("low-discrepancy(n=15)", Domain.box([0, 0], [1, 1]))
        chi = LagrangeBasis(cs, SplineOrder(2, 2)).function(3)
        reg = Region("ball", (0.5, 0.5), 0.5)
        coarse = sobolev_seminorm(chi, 2, reg, QuadratureSpec(cells_per_unit=8, angular_cells=8))
        fine = sobolev_seminorm(chi, 2, reg, QuadratureSpec(cells_per_unit=32, angular_cells=32))
        assert fine.quad_error < coarse.quad_error
        assert fine.quad_error <= 1e-2 * fine.value

    def test_unsupported_dimension(self):
        cs = generate_centers("low-discrepancy(n=20)", Domain.box([0, 0, 0], [1, 1, 1]))
        chi = LagrangeBasis(cs, SplineOrder(2, 3)).function(0)
        with pytest.raises(UnsupportedDimension):
            sobolev_seminorm(chi, 2, Region("ball", (0.5, 0.5, 0.5), 0.5))

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            QuadratureSpec(order=2)


class TestTails:
    def test_profile_nonincreasing(self):
        chi, _ = cubic_lagrange()
        prof = tail_profile(chi, (0.5,), [0.0, 0.05, 0.1, 0.2, 0.4, 0.8], 2)
        assert np.all(np.diff(prof.values) <= 0)
        assert prof.to_csv().startswith("T,tail_seminorm,quad_error\n")

    def test_zero_radius_is_global(self):
        chi, _ = cubic_lagrange()
        T = 3.0
        prof = tail_profile(chi, (0.5,), [0.0, 0.3], 2, truncation=T)
        glob = sobolev_seminorm(chi, 2, Region("ball", (0.5,), T)).value
        assert prof.values[0] == pytest.approx(glob, rel=1e-9)

    def test_hat_tail_vanishes(self):
        cs = generate_centers("uniform-grid(n=11)", UNIT)
        hat = LagrangeBasis(cs, SplineOrder(1, 1)).function(5)
        prof = tail_profile(hat, (0.5,), [0.0, 0.1, 0.2], 1)
        assert prof.values[1] <= 1e-12 and prof.values[0] > 1
        with pytest.raises(TailExhausted):
            tail_ratio(hat, (0.5,), 0.2, 0.3, 1)

    def test_equal_radii_ratio_one(self):
        chi, _ = cubic_lagrange()
        assert tail_ratio(chi, (0.5,), 0.2, 0.2, 2) == pytest.approx(1.0)

    def test_bulk_ratio(self):
        chi, _ = cubic_lagrange()
        r = bulk_ratio(chi, (0.5,), 0.1, 0.5, 3.5, 2)
        assert 0 < r < 1
        cs = generate_centers("uniform-grid(n=11)", UNIT)
        hat = LagrangeBasis(cs, SplineOrder(1, 1)).function(5)
        # inner radius 0.1 * 0.25 lies inside the support, outer 0.1 * 12.25 far beyond it
        assert bulk_ratio(hat, (0.5,), 0.1, 0.5, 3.5, 1) <= 1e-12
        with pytest.raises(ValueError):
            bulk_ratio(chi, (0.5,), 0.1, 0.5, 3.0, 2)

    def test_radii_validation(self):
        chi, _ = cubic_lagrange()
        with pytest.raises(ValueError):
            tail_profile(chi, (0.5,), [0.3, 0.1], 2)
        with pytest.raises(ValueError):
            tail_ratio(chi, (0.5,), 0.3, 0.1, 2)
