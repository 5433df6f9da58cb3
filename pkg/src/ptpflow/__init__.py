"""Nonlinear positive trace-preserving qubit channels and their flows."""

from .analysis import (
    FixedPointRecord,
    PhaseDiagram,
    analytic_fixed_points,
    basin_classify,
    divergence,
    g_min,
    jacobian_stability,
    midpoint_k_matrix,
    pair_separation_rate,
    phase_scan,
    vorticity,
    xi_inverse,
    xi_transform,
)
from .channels import (
    ChannelClass,
    LinearMapAction,
    NormalizedChannel,
    OperatorSumRep,
    apply_normalized,
    builtin_map,
    choi_of,
    classify,
    operator_sum_from_choi,
    positivity_report,
)
from .discrimination import (
    DiscriminationReport,
    DiscriminationTask,
    discriminate,
    prepare_pair,
    run_task,
    sweep_k,
)
from .dynamics import (
    BLOCH_MIRROR,
    DissipativeTorsionParams,
    NinoGeneratorSet,
    Trajectory,
    VectorField,
    dissipative_torsion_field,
    field_rhs,
    integrate,
    integrate_ensemble,
    jump_coords_to_generator,
    nino_bloch_field,
    nino_rhs,
    torsion_field,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .linalg import (
    PAULIS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    from_bloch,
    hermitian_split,
    is_psd,
    matrix_exponential,
    schatten_norm,
    to_bloch,
)
from .scenario import PRESETS, parse_scenario, run_scenario, sample_ball

__version__ = "0.1.0"
