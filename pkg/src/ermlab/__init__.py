"""ermlab: a numerical laboratory for constrained least squares over convex
symmetric classes.

The package estimates localized gaussian mean widths of convex bodies,
solves the complexity fixed points that predict the risk of empirical risk
minimization, runs the ERM solvers themselves, and provides the lower-bound
demonstrations (ratio process, two-point indistinguishability, gaussian
shift bound) that show those predictions are tight.
"""

from .geometry import (
    AtomOracle,
    ConvexBody,
    ConvergenceError,
    DimensionMismatchError,
    UnsupportedBodyError,
    membership,
    project,
    support,
    support_intersection,
)
from .widths import (
    SeparatedSet,
    WidthEstimate,
    build_sparse_separated_set,
    covering_upper,
    gaussian_width_mc,
    kernel_section_diameter,
    kernel_section_witness,
    packing_lower,
)
from .fixed_points import (
    FixedPointQuery,
    FixedPointResult,
    PredictedRate,
    k_star,
    predicted_rate,
    solve_fixed_point,
    width_profile,
)
from .sim import (
    Dataset,
    DesignSpec,
    NoiseSpec,
    bernstein_estimate,
    psi2_estimate,
    sample_dataset,
)
from .erm import (
    ErmConfig,
    ErmSolution,
    erm_frank_wolfe_atoms,
    erm_linear,
    erm_maxnorm_factorized,
    excess_risk,
)
from .diagnostics import (
    RatioQuery,
    accuracy_confidence_lower,
    confidence_accuracy_curve,
    gaussian_shift_bound,
    isomorphic_event_check,
    ratio_sup_estimate,
    two_point_minimax_demo,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    fit_rate,
    load_constants,
    presets,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
