"""Sum-of-exponential stationary densities of obliquely reflected Brownian
motion in a planar wedge: closed-form construction, validation against the
defining equations, and Monte Carlo simulation.

The Monte Carlo kernels run from a compiled extension when available and
fall back to numpy otherwise; `backend_info()` reports which is active.
"""

from ._backend import active_backend, have_compiled
from .density import (
    ExponentialTerm,
    NormalizedDensity,
    QuadratureSpec,
    SumOfExponentials,
    block_coefficients,
    coefficient_recursion_relative,
    coefficient_recursion_residuals,
    density_block,
    density_clockwise,
    density_determinant,
    density_expanded,
    evaluate,
    normalize,
    region_mass_below,
)
from .geometry import (
    Admissibility,
    Drift,
    LabelMatrix,
    WedgeGeometry,
    anticlockwise_reflection,
    anticlockwise_rotation,
    clockwise_reflection,
    clockwise_rotation,
    drift_admissible,
    exponential_order,
    make_wedge,
)
from .simulate import (
    DihedralGroup,
    SimConfig,
    SimResult,
    SurvivalResult,
    density_from_group,
    duality_check,
    reflection_group_survival,
    simulate_srbm,
    survival_mc,
)
from .spectral import (
    SpectralContext,
    bessel_I,
    cheb_T,
    cheb_U,
    corner_limit,
    exp_vandermonde_det,
)
from .validation import (
    MatingPath,
    ValidationReport,
    bar_residual,
    bc_residual,
    boundary_pair_check,
    mating_path,
    pde_residual,
    range_restriction_check,
    sign_scan,
    validate_density,
)

__version__ = "0.1.0"


def backend_info() -> str:
    return active_backend()
