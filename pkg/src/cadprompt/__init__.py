"""CAD-image prompting workbench.

Text prompt -> semantic CAD-image retrieval -> weighted multimodal
generation, plus the evaluation apparatus around it: set-similarity
matrices, balanced rater assignment, survey collection, and nonparametric
analysis.
"""

from .analytics import SimilarityMatrix, set_similarity, similarity_matrix
from .assignment import AssignmentPlan, build_assignment, verify_assignment
from .corpus import CorpusEntry, CorpusStore, ingest_corpus, load_corpus, save_corpus
from .embedding import Embedder, HttpEmbedder, MockEmbedder
from .errors import WorkbenchError
from .generation import (
    GeneratedArtifact,
    GenerationBackend,
    HttpBackend,
    MockBackend,
    execute_plan,
)
from .genplan import (
    GenerationParams,
    GenerationPlan,
    SettingSpec,
    SettingVariant,
    build_plan,
    default_settings_grid,
    weight_grid,
)
from .ratings import RatingRecord, RatingStore, load_ratings
from .retrieval import RetrievalHit, cosine, top_k
from .stats import (
    MannWhitneyResult,
    SpearmanResult,
    mann_whitney,
    mean_ratings,
    quality_flags,
    spearman,
    tradeoff_correlation,
    weight_correlation,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentPlan",
    "CorpusEntry",
    "CorpusStore",
    "Embedder",
    "GeneratedArtifact",
    "GenerationBackend",
    "GenerationParams",
    "GenerationPlan",
    "HttpBackend",
    "HttpEmbedder",
    "MannWhitneyResult",
    "MockBackend",
    "MockEmbedder",
    "RatingRecord",
    "RatingStore",
    "RetrievalHit",
    "SettingSpec",
    "SettingVariant",
    "SimilarityMatrix",
    "SpearmanResult",
    "WorkbenchError",
    "build_assignment",
    "build_plan",
    "cosine",
    "default_settings_grid",
    "execute_plan",
    "ingest_corpus",
    "load_corpus",
    "load_ratings",
    "mann_whitney",
    "mean_ratings",
    "quality_flags",
    "save_corpus",
    "set_similarity",
    "similarity_matrix",
    "spearman",
    "top_k",
    "tradeoff_correlation",
    "verify_assignment",
    "weight_correlation",
    "weight_grid",
]
