"""Semantic retrieval: find the CAD image(s) closest to a text prompt.

Scoring is plain cosine similarity over the shared embedding space. The
index is an exact exhaustive scan — corpora here are at most tens of
thousands of images, and exactness is what the downstream oracle tests
demand. Ties are broken by ascending image_id so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CorpusEntry, CorpusStore
from .embedding import Embedder
from .errors import RetrievalError


@dataclass
class RetrievalHit:
    """One ranked retrieval result. ``score`` is the cosine similarity."""

    entry: CorpusEntry
    score: float
    rank: int


def cosine(a, b) -> float:
    """Cosine similarity of two vectors: ``dot(a, b) / (|a| * |b|)``.

    Inputs need not be normalized. Rejects dimension mismatches, non-finite
    entries, and zero-norm vectors. The result is clamped to [-1, 1], which
    absorbs float round-off on (anti)parallel inputs.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise RetrievalError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise RetrievalError("cosine inputs must be finite")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise RetrievalError("cosine is undefined for zero-norm vectors")
    value = float(np.dot(va, vb) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))


def rank_entries(store: CorpusStore, query_vec: np.ndarray, k: int) -> list[RetrievalHit]:
    """Rank corpus entries against a query vector, highest cosine first.

    Ties broken by ascending image_id; ``k`` larger than the corpus returns
    everything ranked.
    """
    if len(store) == 0:
        raise RetrievalError("cannot retrieve from an empty corpus")
    if k < 1:
        raise RetrievalError(f"k must be >= 1, got {k}")
    query = np.asarray(query_vec, dtype=np.float64)
    if query.shape != (store.dim,):
        raise RetrievalError(
            f"query has dimension {query.shape}, corpus dimension is {store.dim}"
        )
    qnorm = float(np.linalg.norm(query))
    if qnorm == 0.0:
        raise RetrievalError("query vector has zero norm")
    scores = store.matrix @ (query / qnorm)
    np.clip(scores, -1.0, 1.0, out=scores)
    order = sorted(
        range(len(store)), key=lambda i: (-scores[i], store.entries[i].image_id)
    )
    return [
        RetrievalHit(entry=store.entries[i], score=float(scores[i]), rank=r + 1)
        for r, i in enumerate(order[:k])
    ]


def top_k(
    store: CorpusStore, query_text: str, k: int = 1, *, embedder: Embedder
) -> list[RetrievalHit]:
    """Return the *k* corpus images most similar to *query_text*.

    The embedder must be the one the corpus was built with; a mismatch would
    silently compare vectors from different spaces, so it is rejected.
    """
    if embedder.embedder_id != store.embedder_id:
        raise RetrievalError(
            f"embedder mismatch: corpus was built with {store.embedder_id!r}, "
            f"query uses {embedder.embedder_id!r}"
        )
    return rank_entries(store, embedder.embed_text(query_text), k)


def top_1(store: CorpusStore, query_text: str, *, embedder: Embedder) -> RetrievalHit:
    return top_k(store, query_text, 1, embedder=embedder)[0]
