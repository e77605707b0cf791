"""Exception types shared across the toolkit."""


class CrowdBenchError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(CrowdBenchError):
    """Raised for malformed, inconsistent, or unloadable corpus data."""


class EmbeddingError(CrowdBenchError):
    """Raised for invalid embedding files or failed remote fetches."""


class EstimationError(CrowdBenchError):
    """Raised when an estimate cannot be produced (degenerate groups,
    too many near-singular replicates, mismatched comparisons)."""


class ConfigError(CrowdBenchError):
    """Raised for invalid run configuration files or flag combinations."""
