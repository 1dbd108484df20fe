"""Surface spline interpolation on scattered centers with local density diagnostics."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .geometry import CenterSet, Domain, Region, generate_centers, separation, fill_distance
from .kernel import SplineOrder, SingularPointError, phi, phi_partial
from .interpolation import (IllConditionedError, Interpolant, LagrangeBasis, NotUnisolventError,
                            NumericalFailure, check_unisolvent, fit, native_energy)
from .density import DensityField, density_field, slow_growth_majorant
from .stability import (default_grid, interval_grid, lebesgue_constant, penalized_lebesgue,
                        fit_decay, refinement_sweep)

__all__ = [
    "BACKEND", "CenterSet", "Domain", "Region", "generate_centers", "separation",
    "fill_distance", "SplineOrder", "SingularPointError", "phi", "phi_partial",
    "IllConditionedError", "Interpolant", "LagrangeBasis", "NotUnisolventError",
    "NumericalFailure", "check_unisolvent", "fit", "native_energy", "DensityField",
    "density_field", "slow_growth_majorant", "default_grid", "interval_grid",
    "lebesgue_constant", "penalized_lebesgue", "fit_decay",
    "refinement_sweep",
]
