"""CAD-image corpus: ingestion, persistence, and the retrieval pool.

A corpus is built once from a manifest of image files, embedded with a
chosen embedder, and then treated as immutable. Retrieval and planning only
ever read it. The on-disk format is a versioned JSON document
(``"corpus/1"``) so stores are human-inspectable and diff-friendly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .embedding import Embedder, as_unit_vector, check_unit_vector
from .errors import CorpusError

CORPUS_VERSION = "corpus/1"


@dataclass
class CorpusEntry:
    """One CAD image in the retrieval pool."""

    image_id: str
    uri: str
    embedding: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class CorpusStore:
    """Immutable set of embedded CAD images sharing one embedding space."""

    dim: int
    embedder_id: str
    entries: list[CorpusEntry]

    def __post_init__(self):
        seen: set[str] = set()
        for entry in self.entries:
            if entry.image_id in seen:
                raise CorpusError(f"duplicate image_id in corpus: {entry.image_id!r}")
            seen.add(entry.image_id)
            if entry.embedding.shape != (self.dim,):
                raise CorpusError(
                    f"entry {entry.image_id!r} has dimension "
                    f"{entry.embedding.shape[0]}, corpus dimension is {self.dim}"
                )
            norm = float(np.linalg.norm(entry.embedding))
            if abs(norm - 1.0) > 1e-6:
                raise CorpusError(
                    f"entry {entry.image_id!r} is not normalized (norm={norm!r})"
                )

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def matrix(self) -> np.ndarray:
        """(N, dim) matrix of all entry embeddings, in manifest order."""
        return np.vstack([e.embedding for e in self.entries])


def load_manifest(path: str | Path) -> list[dict]:
    """Read a corpus manifest: ``{"images": [{image_id, uri, metadata?}]}``.

    URIs are resolved relative to the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    images = doc.get("images")
    if not isinstance(images, list) or not images:
        raise CorpusError(f"manifest {path} lists no images")
    base = path.parent
    records = []
    for i, item in enumerate(images):
        if "image_id" not in item or "uri" not in item:
            raise CorpusError(f"manifest image {i} is missing image_id or uri")
        uri = item["uri"]
        resolved = uri if Path(uri).is_absolute() else str(base / uri)
        records.append(
            {
                "image_id": str(item["image_id"]),
                "uri": resolved,
                "metadata": dict(item.get("metadata", {})),
            }
        )
    return records


def ingest_corpus(manifest: str | Path | list[dict], embedder: Embedder) -> CorpusStore:
    """Embed every image listed in *manifest* into a new store.

    Entries keep manifest order. Duplicate ids and unreadable image files are
    rejected with the offending id/uri named in the error.
    """
    records = load_manifest(manifest) if isinstance(manifest, (str, Path)) else manifest
    if not records:
        raise CorpusError("manifest lists no images")
    seen: set[str] = set()
    entries: list[CorpusEntry] = []
    for record in records:
        image_id = record["image_id"]
        if image_id in seen:
            raise CorpusError(f"duplicate image_id in manifest: {image_id!r}")
        seen.add(image_id)
        uri = record["uri"]
        try:
            data = Path(uri).read_bytes()
        except OSError as exc:
            raise CorpusError(f"cannot read image {uri!r}: {exc}") from exc
        vec = as_unit_vector(embedder.embed_image(data), dim=embedder.dim)
        entries.append(
            CorpusEntry(
                image_id=image_id,
                uri=uri,
                embedding=vec,
                metadata=dict(record.get("metadata", {})),
            )
        )
    return CorpusStore(dim=embedder.dim, embedder_id=embedder.embedder_id, entries=entries)


def save_corpus(store: CorpusStore, path: str | Path) -> None:
    """Write *store* as a ``corpus/1`` JSON document.

    Floats are serialized with Python's shortest round-trip repr, so
    ``load_corpus(save_corpus(s))`` reproduces every embedding bit-exactly.
    """
    doc = {
        "version": CORPUS_VERSION,
        "dim": store.dim,
        "embedder_id": store.embedder_id,
        "entries": [
            {
                "image_id": e.image_id,
                "uri": e.uri,
                "embedding": e.embedding.tolist(),
                "metadata": e.metadata,
            }
            for e in store.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_corpus(path: str | Path) -> CorpusStore:
    """Load a ``corpus/1`` document, validating every record.

    A version mismatch or a malformed record is rejected; record errors name
    the entry index.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
    version = doc.get("version")
    if version != CORPUS_VERSION:
        raise CorpusError(
            f"corpus file {path} has version {version!r}, expected {CORPUS_VERSION!r}"
        )
    try:
        dim = int(doc["dim"])
        embedder_id = str(doc["embedder_id"])
        raw_entries = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"corpus file {path} is missing required fields: {exc}") from exc
    entries: list[CorpusEntry] = []
    for i, raw in enumerate(raw_entries):
        try:
            vec = check_unit_vector(raw["embedding"], dim=dim)
            entries.append(
                CorpusEntry(
                    image_id=str(raw["image_id"]),
                    uri=str(raw["uri"]),
                    embedding=vec,
                    metadata=dict(raw.get("metadata", {})),
                )
            )
        except Exception as exc:
            raise CorpusError(f"corrupted corpus record at index {i}: {exc}") from exc
    return CorpusStore(dim=dim, embedder_id=embedder_id, entries=entries)
