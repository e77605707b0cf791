"""crowdbench: human-relative idea-space crowding estimation.

Estimates how much more a model-conditioned source crowds idea-space than
a matched unaided human baseline, and converts the excess into
adoption-game quantities (redundancy costs, critical-benefit thresholds,
expected population costs).
"""

from .adoption import (
    AdoptionScenario,
    MonteCarloCost,
    ParityReport,
    critical_benefit,
    delta_from_rho,
    expected_cost,
    mass_adoption_limit,
    monte_carlo_expected_cost,
    parity_check,
    redundancy_cost,
)
from .corpus import (
    Corpus,
    GroupReport,
    Response,
    SamplingUnit,
    ValidationReport,
    build_corpus,
    load_corpus,
    partition_units,
    save_corpus,
    validate_corpus,
)
from .embeddings import (
    CoverageReport,
    EmbeddingTable,
    coverage_check,
    fetch_embeddings_remote,
    load_embeddings,
    save_embeddings,
)
from .errors import ConfigError, CorpusError, CrowdBenchError, EmbeddingError, EstimationError
from .estimators import (
    ConditionEstimate,
    CrowdingEstimator,
    EstimatorConfig,
    FamilyEstimate,
    PointCI,
    ProtocolComparison,
    aggregate_family,
    bootstrap_condition,
    compare_protocols,
    pairwise_mean_crowding,
    spearman_rank,
)
from .kernels import (
    KernelSpec,
    bucket_kernel,
    char_trigram_jaccard,
    char_trigrams,
    kernel_for,
    load_stopwords,
    normalize_text,
    resolve_stopwords,
    semantic_kernel,
    tokens,
    word_jaccard,
)
from .rarefaction import RarefactionCurve, default_grid, drift_pair, rarefaction_curve, relative_drift

__version__ = "0.1.0"

__all__ = [
    "AdoptionScenario",
    "ConditionEstimate",
    "ConfigError",
    "Corpus",
    "CorpusError",
    "CoverageReport",
    "CrowdBenchError",
    "CrowdingEstimator",
    "EmbeddingError",
    "EmbeddingTable",
    "EstimationError",
    "EstimatorConfig",
    "FamilyEstimate",
    "GroupReport",
    "KernelSpec",
    "MonteCarloCost",
    "ParityReport",
    "PointCI",
    "ProtocolComparison",
    "RarefactionCurve",
    "Response",
    "SamplingUnit",
    "ValidationReport",
    "aggregate_family",
    "bootstrap_condition",
    "bucket_kernel",
    "build_corpus",
    "char_trigram_jaccard",
    "char_trigrams",
    "compare_protocols",
    "coverage_check",
    "critical_benefit",
    "default_grid",
    "delta_from_rho",
    "drift_pair",
    "expected_cost",
    "fetch_embeddings_remote",
    "kernel_for",
    "load_corpus",
    "load_embeddings",
    "load_stopwords",
    "mass_adoption_limit",
    "monte_carlo_expected_cost",
    "normalize_text",
    "pairwise_mean_crowding",
    "parity_check",
    "partition_units",
    "rarefaction_curve",
    "redundancy_cost",
    "relative_drift",
    "resolve_stopwords",
    "save_corpus",
    "save_embeddings",
    "semantic_kernel",
    "spearman_rank",
    "tokens",
    "validate_corpus",
    "word_jaccard",
]
