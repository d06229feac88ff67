"""Set-similarity analytics over generated artifacts.

For one prompt, each generation setting yields a handful of images. How
alike two settings' outputs are is summarized by the mean pairwise cosine
similarity between their embedding sets; comparing a setting with itself
averages over distinct unordered pairs (self-pairs excluded, which is why
diagonal values sit well below 1). Assembling every setting pair gives a
symmetric matrix per prompt.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import AnalyticsError
from .generation import GeneratedArtifact


def _as_matrix(vectors) -> np.ndarray:
    mat = np.asarray([np.asarray(v, dtype=np.float64) for v in vectors])
    if mat.ndim != 2:
        raise AnalyticsError("embedding set must be a list of 1-D vectors")
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(mat)):
        raise AnalyticsError("embedding set contains zero or non-finite vectors")
    return mat / norms[:, None]


def set_similarity(A, B, same_set: bool = False) -> tuple[float, int]:
    """Mean pairwise cosine similarity between two sets of embeddings.

    Cross-set (``same_set=False``): mean over all |A| x |B| ordered pairs.
    Within-set (``same_set=True``): A and B are the same collection; the mean
    runs over all C(n, 2) distinct unordered pairs, excluding self-pairs.

    Returns ``(mean, pair_count)``.
    """
    a = list(A)
    b = list(B)
    if not a or not b:
        raise AnalyticsError("set_similarity requires nonempty sets")
    if same_set:
        if len(a) != len(b):
            raise AnalyticsError("same_set comparison requires identical sets")
        if len(a) < 2:
            raise AnalyticsError(
                "within-set similarity needs at least 2 items (no distinct pairs)"
            )
        mat = _as_matrix(a)
        gram = mat @ mat.T
        iu = np.triu_indices(len(a), k=1)
        values = np.clip(gram[iu], -1.0, 1.0)
        return float(values.mean()), int(values.size)
    mat_a = _as_matrix(a)
    mat_b = _as_matrix(b)
    if mat_a.shape[1] != mat_b.shape[1]:
        raise AnalyticsError(
            f"dimension mismatch: {mat_a.shape[1]} vs {mat_b.shape[1]}"
        )
    gram = np.clip(mat_a @ mat_b.T, -1.0, 1.0)
    return float(gram.mean()), int(gram.size)


@dataclass
class SimilarityMatrix:
    """Setting-by-setting mean pairwise similarity for one prompt."""

    labels: list[str]
    values: np.ndarray
    pair_counts: np.ndarray
    prompt_id: str

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "labels": self.labels,
            "values": self.values.tolist(),
            "pair_counts": self.pair_counts.tolist(),
        }

    def to_csv(self) -> str:
        """Upper-triangle CSV: labels as headers, entries only for j >= i."""
        out = io.StringIO()
        out.write("," + ",".join(self.labels) + "\r\n")
        n = len(self.labels)
        for i in range(n):
            cells = ["" if j < i else format(self.values[i, j], ".6g") for j in range(n)]
            out.write(self.labels[i] + "," + ",".join(cells) + "\r\n")
        return out.getvalue()


def similarity_matrix(
    groups: dict[str, list[np.ndarray]],
    labels: list[str] | None = None,
    prompt_id: str = "",
) -> SimilarityMatrix:
    """Mean pairwise similarity between every pair of setting groups.

    ``groups`` maps setting label -> embeddings of that setting's artifacts
    for one prompt; every group needs at least 2 members so the diagonal is
    defined. Only the upper triangle is computed and then mirrored, so the
    result is exactly symmetric.
    """
    labels = list(labels) if labels is not None else sorted(groups)
    for label in labels:
        if label not in groups:
            raise AnalyticsError(f"missing artifact group for setting {label!r}")
        if len(groups[label]) < 2:
            raise AnalyticsError(
                f"setting {label!r} has {len(groups[label])} artifacts; need >= 2"
            )
    n = len(labels)
    values = np.zeros((n, n))
    counts = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i, n):
            mean, count = set_similarity(
                groups[labels[i]], groups[labels[j]], same_set=(i == j)
            )
            values[i, j] = values[j, i] = mean
            counts[i, j] = counts[j, i] = count
    return SimilarityMatrix(
        labels=labels, values=values, pair_counts=counts, prompt_id=prompt_id
    )


def canonical_label_order(labels) -> list[str]:
    """Sort setting labels in grid order: SD, SD+PM, then CIP by weight;
    anything unrecognized goes last, alphabetically."""

    def key(label: str):
        if label == "SD":
            return (0, 0.0, label)
        if label == "SD+PM":
            return (1, 0.0, label)
        if label.startswith("CIP(") and label.endswith(")"):
            try:
                return (2, float(label[4:-1]), label)
            except ValueError:
                pass
        return (3, 0.0, label)

    return sorted(labels, key=key)


def groups_for_prompt(
    artifacts: list[GeneratedArtifact], prompt_id: str
) -> dict[str, list[np.ndarray]]:
    """Group one prompt's artifact embeddings by setting label."""
    groups: dict[str, list[np.ndarray]] = {}
    for artifact in artifacts:
        if artifact.prompt_id == prompt_id:
            groups.setdefault(artifact.setting_label, []).append(artifact.embedding)
    if not groups:
        raise AnalyticsError(f"no artifacts found for prompt {prompt_id!r}")
    return groups


def prompt_similarity_matrix(
    artifacts: list[GeneratedArtifact], prompt_id: str
) -> SimilarityMatrix:
    """Similarity matrix for one prompt, labels in canonical grid order."""
    groups = groups_for_prompt(artifacts, prompt_id)
    return similarity_matrix(
        groups, labels=canonical_label_order(groups), prompt_id=prompt_id
    )


def mean_similarity_matrix(matrices: list[SimilarityMatrix]) -> SimilarityMatrix:
    """Element-wise average of per-prompt matrices sharing one label set.

    A cross-prompt convenience summary; individual per-prompt matrices remain
    the primary output.
    """
    if not matrices:
        raise AnalyticsError("no matrices to average")
    labels = matrices[0].labels
    for m in matrices[1:]:
        if m.labels != labels:
            raise AnalyticsError("matrices have differing label sets")
    values = np.mean([m.values for m in matrices], axis=0)
    counts = np.sum([m.pair_counts for m in matrices], axis=0)
    return SimilarityMatrix(
        labels=list(labels), values=values, pair_counts=counts, prompt_id="<mean>"
    )
