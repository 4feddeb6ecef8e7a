"""Numerical verification of the total Q-curvature upper bound and its
isoperimetric deficit for conformal metrics g = e^{2u} g_0 on R^n."""

from .errors import QDeficitError
from .fraclap import (
    FracLapResult,
    PotentialResult,
    fractional_power_laplacian,
    green_constant,
    green_constant_check,
    half_laplacian,
    hankel_half_laplacian,
    iterated_laplacian,
    log_potential,
    radial_laplacian,
    riesz_potential_order1,
)
from .grids import (
    GridFunction,
    GridSpec,
    LimitEstimate,
    PowerTail,
    build_grid,
    differentiate,
    extrapolate_limit,
    integrate_radial,
    sphere_area,
    unit_ball_volume,
)
from .kernels import (
    SphereKernelQuery,
    SupScan,
    kernel_I,
    kernel_sup_scan,
    monte_carlo_sphere_average,
    sphere_average_log,
    sphere_average_power,
)
from .metric import (
    CompletenessResult,
    ConformalMetric,
    CurvatureReport,
    DeficitReport,
    HypothesisFlags,
    MixedVolumes,
    area,
    completeness_check,
    deficit,
    mixed_volumes,
    scalar_curvature,
    total_q,
    volume,
)
from .profiles import (
    ProfileTail,
    RadialProfile,
    capped_log_profile,
    dilate_profile,
    family_alpha,
    flat_profile,
    log_profile,
    sphere_factor,
)
from .symmetrize import (
    Bump,
    NonRadialField,
    SphereRule,
    derivative_moment,
    exp_average_ratio,
    general_mixed_volumes,
    sphere_mean,
    sphere_rule,
    symmetrized_profile,
    totalq_preserved,
)
from .verify import SweepPlan, TheoremReport, check_hypotheses, run_sweep, verify_theorem

__version__ = "0.1.0"
