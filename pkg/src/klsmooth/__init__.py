"""Smoothing estimators for discrete distributions under relative-entropy loss.

The package provides the estimation rules (empirical frequencies and the
add-lambda smoothing family, including data- and confidence-dependent
smoothing levels), the effective-sparsity and missing-mass functionals
that govern their risk, adversarial instance generators, an exact
small-instance oracle, and a Monte Carlo harness that checks every
registered risk bound against empirical quantiles.
"""

from .distribution import (
    CriticalSamples,
    EpsBarResult,
    GapCheck,
    ProbVector,
    SparsityProfile,
    critical_samples,
    effective_missing_support,
    effective_support,
    eps_bar,
    expected_distinct_classes,
    expected_missing_mass,
    gap_characterization,
    make_prob_vector,
    resolve_distribution,
    sparsity_profile,
)
from .errors import CapExceededError, SizeCapError, ValidationError
from .estimators import (
    CountVector,
    EstimatorSpec,
    RiskDecomposition,
    bound_ids,
    bound_value,
    count_vector,
    estimate,
    risk_decomposition,
    smoothing_level,
)
from .experiments import (
    BoundCheckReport,
    ExperimentConfig,
    LowerBoundCheck,
    TailReport,
    check_lower_bound_construction,
    mc_expectation,
    mc_risk_tail,
    regime_map,
)
from .numerics import (
    entropy_h,
    hellinger_sq,
    kl_divergence,
    kl_hellinger_ratio_phi,
    kl_term_D,
    poisson_chernoff_tail,
)
from .oracle import ExactDistribution, ExactFunctionals, enumerate_count_vectors, exact_functionals
from .sampling import (
    AliasSampler,
    RngSeed,
    SampleSummary,
    draw_counts,
    draw_coupled_poissonized,
    draw_poissonized_counts,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "AliasSampler",
    "BoundCheckReport",
    "CapExceededError",
    "CountVector",
    "CriticalSamples",
    "EpsBarResult",
    "EstimatorSpec",
    "ExactDistribution",
    "ExactFunctionals",
    "ExperimentConfig",
    "GapCheck",
    "LowerBoundCheck",
    "ProbVector",
    "RiskDecomposition",
    "RngSeed",
    "SampleSummary",
    "SizeCapError",
    "SparsityProfile",
    "TailReport",
    "ValidationError",
    "bound_ids",
    "bound_value",
    "check_lower_bound_construction",
    "count_vector",
    "critical_samples",
    "draw_counts",
    "draw_coupled_poissonized",
    "draw_poissonized_counts",
    "effective_missing_support",
    "effective_support",
    "entropy_h",
    "enumerate_count_vectors",
    "eps_bar",
    "estimate",
    "exact_functionals",
    "expected_distinct_classes",
    "expected_missing_mass",
    "gap_characterization",
    "hellinger_sq",
    "kl_divergence",
    "kl_hellinger_ratio_phi",
    "kl_term_D",
    "make_prob_vector",
    "mc_expectation",
    "mc_risk_tail",
    "poisson_chernoff_tail",
    "regime_map",
    "resolve_distribution",
    "risk_decomposition",
    "smoothing_level",
    "sparsity_profile",
    "summarize",
]
