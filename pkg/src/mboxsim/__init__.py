"""Classical round-by-round simulation of two-qubit measurement statistics.

A family of partially entangled states is simulated by local strategies
plus bounded resources: shared random unit vectors, one classical bit from
Alice to Bob, and one call to a comparison box per round.  The package
contains the protocol engines, the exact quantum targets, an EPR2-style
local/nonlocal split, deterministic batch execution, and a verification
layer whose oracles are independent of the sampling paths they check.
"""

from .boxes import (
    MBoxOutcome,
    ResourceLedger,
    compare_bit,
    mbox_call,
    outcome_from_uniform,
    send_cbit,
)
from .geometry import (
    Completion,
    CompletionStrategy,
    as_unit_vector,
    complete_to_unit,
    sample_unit_sphere,
    sgn,
    spherical_grid,
    unit_vector_from_uniforms,
)
from .protocols import (
    FlipSpec,
    RoundTranscript,
    SharedRandomness,
    build_u,
    build_v,
    correlated_flip,
    protocol1_round,
    protocol2_round,
    run_batch,
    symmetrize,
    tb_round,
)
from .quantum import (
    DegenerateAxisError,
    EntanglementParam,
    JointDist,
    chsh_value,
    correlation,
    epr2_components,
    epr2_correlation,
    epr2_flip_probability,
    epr2_local_bias,
    in_slice,
    joint_local_product,
    joint_nl,
    joint_qm,
    slice_threshold,
)
from .runtime import (
    ExperimentConfig,
    load_settings_csv,
    round_uniform_block,
    run_experiment,
    write_report,
)
from .verify import (
    CheckResult,
    ComparisonReport,
    EstimateWithError,
    JointEstimate,
    branch_correlation_claim,
    claim_residual_report,
    compare,
    epr2_suite,
    estimate_joint,
    estimate_mean,
    exact_mu_average,
    flip_moments_claim,
    flip_moments_exact,
    quadrature_kernel,
)

__version__ = "0.1.0"

__all__ = [
    "CheckResult",
    "Completion",
    "CompletionStrategy",
    "ComparisonReport",
    "DegenerateAxisError",
    "EntanglementParam",
    "EstimateWithError",
    "ExperimentConfig",
    "FlipSpec",
    "JointDist",
    "JointEstimate",
    "MBoxOutcome",
    "ResourceLedger",
    "RoundTranscript",
    "SharedRandomness",
    "as_unit_vector",
    "branch_correlation_claim",
    "build_u",
    "build_v",
    "chsh_value",
    "claim_residual_report",
    "compare",
    "compare_bit",
    "complete_to_unit",
    "correlated_flip",
    "correlation",
    "epr2_components",
    "epr2_correlation",
    "epr2_flip_probability",
    "epr2_local_bias",
    "epr2_suite",
    "estimate_joint",
    "estimate_mean",
    "exact_mu_average",
    "flip_moments_claim",
    "flip_moments_exact",
    "in_slice",
    "joint_local_product",
    "joint_nl",
    "joint_qm",
    "load_settings_csv",
    "mbox_call",
    "outcome_from_uniform",
    "protocol1_round",
    "protocol2_round",
    "quadrature_kernel",
    "round_uniform_block",
    "run_batch",
    "run_experiment",
    "sample_unit_sphere",
    "send_cbit",
    "sgn",
    "slice_threshold",
    "spherical_grid",
    "symmetrize",
    "tb_round",
    "unit_vector_from_uniforms",
    "write_report",
    "__version__",
]
