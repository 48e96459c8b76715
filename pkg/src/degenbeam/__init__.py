"""Clamped degenerate beam with boundary damping: simulation and decay certificates.

The package simulates a fourth-order beam whose flexural coefficient vanishes
at the clamped end, integrates it with an energy-dissipative implicit scheme,
and checks the quantitative stabilization estimates (energy identity,
multiplier identities, exponential decay bound) with all constants computed
from closed-form ledgers.
"""

__version__ = "0.1.0"

from .coefficient import (
    CoefficientError,
    CoefficientReport,
    DegeneracyClass,
    DegeneracyCoefficient,
    HardyEstimate,
    characterize,
    check_hypothesis,
    compute_k,
    estimate_hardy_constant,
    eval_a,
    eval_a_prime,
)
from .discretization import (
    AssemblyError,
    BeamDiscretization,
    build,
    gauss_green_residual,
    interpolate,
    triple_norm_sq,
    weighted_l2_norm_sq,
)
from .statics import (
    CubicSolution,
    EstimateReport,
    StaticProblem,
    cubic_oracle,
    solve_variational,
    verify_estimates,
)
from .dynamics import (
    BeamState,
    EnergyTrace,
    MultiplierReport,
    energy,
    energy_derivative_identity_residual,
    multiplier_identity_residual,
    simulate,
    step,
)
from .stability import (
    DecayReport,
    ObservabilityReport,
    StabilityConstants,
    attach_bound,
    compute_constants,
    theoretical_bound,
    verify_decay,
    verify_observability_estimates,
)
