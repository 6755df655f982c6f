"""Outlying-sequence detection via KL-divergence clustering.

Given M sequences of n i.i.d. categorical samples, of which a strict
minority follow different distributions, the package provides exhaustive
generalized-likelihood baselines, linear-complexity clustering tests for
both known and unknown outlier counts, grid oracles for the associated
divergence bounds and error exponents, and a seeded Monte Carlo harness.

All divergences are in nats.  Hot kernels run under a JIT when available;
set OUTLIERSEQ_BACKEND=numpy|numba|auto before import to pick explicitly.
"""

from ._kernels import BACKEND
from .analysis import (
    ClusterConditionCheck,
    DivergenceConstraint,
    Example1Certificate,
    ExponentEstimate,
    ExponentProblem,
    EXPONENT_SET_NAMES,
    bhattacharyya_bound,
    check_cluster_condition,
    estimate_exponent,
    example1_certificate,
    exponent_problem,
    lemma2_closed_form,
    lemma2_oracle,
)
from .clustering import (
    ClusterState,
    StopRule,
    TestOutcome,
    UNTIL_CONVERGENCE,
    delta2,
    delta3,
    init_known_t,
    init_unknown,
    kmeans2,
    kth_smallest,
    top_t_largest,
)
from .gl import (
    DEFAULT_SUBSET_CAP,
    DEFAULT_UNKNOWN_M_CAP,
    EnumerationCapError,
    GlCostBreakdown,
    OutlierSet,
    gl_cost_known_t,
    gl_cost_unknown,
    gl_test_known_t,
    gl_test_unknown,
)
from .pmf import (
    Alphabet,
    Pmf,
    SequenceSet,
    average,
    bhattacharyya,
    empirical,
    empirical_smoothed,
    kl,
    pmf_matrix,
    total_variation,
)
from .simulate import (
    ConfigurationError,
    KIND_DISTINCT_OUTLIERS,
    KIND_IDENTICAL_BOTH,
    KIND_TWO_CLUSTERS,
    PRESET_NAMES,
    Preset,
    SCENARIO_KINDS,
    Scenario,
    ScenarioSpec,
    SimConfig,
    SimRecord,
    TEST_NAMES,
    build_preset,
    convergence_profile,
    gen_cluster,
    gen_random_outliers,
    realize_trial,
    run_m_sweep,
    run_preset,
    run_sim,
    trial_rng,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "BACKEND",
    "ClusterConditionCheck",
    "ClusterState",
    "ConfigurationError",
    "DEFAULT_SUBSET_CAP",
    "DEFAULT_UNKNOWN_M_CAP",
    "DivergenceConstraint",
    "EnumerationCapError",
    "Example1Certificate",
    "ExponentEstimate",
    "ExponentProblem",
    "EXPONENT_SET_NAMES",
    "GlCostBreakdown",
    "KIND_DISTINCT_OUTLIERS",
    "KIND_IDENTICAL_BOTH",
    "KIND_TWO_CLUSTERS",
    "OutlierSet",
    "Pmf",
    "Preset",
    "PRESET_NAMES",
    "SCENARIO_KINDS",
    "Scenario",
    "ScenarioSpec",
    "SequenceSet",
    "SimConfig",
    "SimRecord",
    "StopRule",
    "TEST_NAMES",
    "TestOutcome",
    "UNTIL_CONVERGENCE",
    "average",
    "bhattacharyya",
    "bhattacharyya_bound",
    "build_preset",
    "check_cluster_condition",
    "convergence_profile",
    "delta2",
    "delta3",
    "empirical",
    "empirical_smoothed",
    "estimate_exponent",
    "example1_certificate",
    "exponent_problem",
    "gen_cluster",
    "gen_random_outliers",
    "gl_cost_known_t",
    "gl_cost_unknown",
    "gl_test_known_t",
    "gl_test_unknown",
    "init_known_t",
    "init_unknown",
    "kl",
    "kmeans2",
    "kth_smallest",
    "lemma2_closed_form",
    "lemma2_oracle",
    "pmf_matrix",
    "realize_trial",
    "run_m_sweep",
    "run_preset",
    "run_sim",
    "top_t_largest",
    "total_variation",
    "trial_rng",
    "__version__",
]
