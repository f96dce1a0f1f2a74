"""Bandits with signed resource drifts: relaxation, policies, simulation."""

from .environment import (
    BudgetState,
    Environment,
    EpisodeSampler,
    OutcomeDistribution,
    StepRecord,
    make_fixture,
    resolve_environment,
)
from .exceptions import (
    AssumptionViolated,
    DegenerateFit,
    DriftBanditsError,
    IllegalArm,
    InfeasibleInstance,
    InvalidInstance,
    MarginViolated,
    OracleScaleExceeded,
    UnclassifiableSupport,
    UnknownFixture,
)
from .harness import (
    EpisodeSummary,
    RunConfig,
    ScalingFit,
    SweepResult,
    fit_scaling,
    run_episode,
    sweep,
    write_csv,
)
from .lp import (
    LpInstance,
    LpSolution,
    SeparationConstants,
    compute_constants,
    compute_gap,
    enumerate_vertex_optimum,
    smallest_singular_value,
    solve_minus_arm,
    solve_minus_resource,
    solve_relaxation,
)
from .policies import (
    CbOnePolicy,
    CbPolicy,
    ConfidenceTable,
    EtcbPolicy,
    LpSamplerPolicy,
    NullOnlyPolicy,
    cb1_classify,
    cb_build_signs,
    cb_solve_gamma,
    make_policy,
    ucb_lp_values,
)
from .reduction import BwkInstance, check_lp_equivalence, lift, run_reduction

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
