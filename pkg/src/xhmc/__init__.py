"""Hamiltonian Monte Carlo with static and dynamic integration-time schemes."""

from .chain import ChainOutput, SamplerConfig, coarse_step_search, run_chain, run_chains
from .diagnostics import DiagnosticsSummary, energy_diagnostics, ess, summarize
from .integrator import StepConfig, check_divergence, exact_gaussian_flow, leapfrog_step
from .phase import (
    EuclideanMetric,
    HamiltonianSystem,
    PhasePoint,
    flip_momentum,
    sample_momentum,
    virial,
)
from .targets import GaussianModel, IrtModel, TargetModel, generate_irt_data
from .termination import (
    SegmentStats,
    TerminationCriterion,
    check_exhaustion,
    check_nuts,
    merge_stats,
    segment_stats_single,
    trace_kappa,
)
from .trajectory import (
    TransitionRecord,
    TreeSegment,
    build_tree,
    dynamic_transition,
    slice_sample_trajectory,
    static_metropolis_transition,
    static_uniform_transition,
)

__all__ = [
    "ChainOutput",
    "DiagnosticsSummary",
    "EuclideanMetric",
    "GaussianModel",
    "HamiltonianSystem",
    "IrtModel",
    "PhasePoint",
    "SamplerConfig",
    "SegmentStats",
    "StepConfig",
    "TargetModel",
    "TerminationCriterion",
    "TransitionRecord",
    "TreeSegment",
    "build_tree",
    "check_divergence",
    "check_exhaustion",
    "check_nuts",
    "coarse_step_search",
    "dynamic_transition",
    "energy_diagnostics",
    "ess",
    "exact_gaussian_flow",
    "flip_momentum",
    "generate_irt_data",
    "leapfrog_step",
    "merge_stats",
    "run_chain",
    "run_chains",
    "sample_momentum",
    "segment_stats_single",
    "slice_sample_trajectory",
    "static_metropolis_transition",
    "static_uniform_transition",
    "summarize",
    "trace_kappa",
    "virial",
]
