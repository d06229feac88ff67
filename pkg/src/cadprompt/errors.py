"""Exception hierarchy shared across the workbench.

Every error that reflects bad data or an unusable input derives from
:class:`WorkbenchError`, so the CLI can map it to a "data error" exit code.
Plain programming mistakes (wrong types, impossible arguments baked into
code) still surface as the usual built-ins.
"""


class WorkbenchError(Exception):
    """Base class for all data-level failures raised by this package."""


class EmbeddingError(WorkbenchError):
    """Invalid embedding vector or embedder misuse."""


class CorpusError(WorkbenchError):
    """Corpus manifest, ingestion, or persistence failure."""


class RetrievalError(WorkbenchError):
    """Query cannot be answered against the given corpus."""


class PlanError(WorkbenchError):
    """Generation plan construction or serialization failure."""


class GenerationError(WorkbenchError):
    """Backend dispatch or artifact persistence failure."""


class AnalyticsError(WorkbenchError):
    """Similarity computation rejected its inputs."""


class AssignmentError(WorkbenchError):
    """Rater assignment parameters are infeasible or inconsistent."""


class StatsError(WorkbenchError):
    """Statistical routine rejected its inputs."""


class RatingsError(WorkbenchError):
    """Rating record or ratings file is invalid."""


class SurveyError(WorkbenchError):
    """Survey protocol violation (out-of-order, duplicate, unknown rater)."""
