"""Embedding vectors and the embedder abstraction.

The workbench treats the text/image encoder as a black box behind the
:class:`Embedder` interface. Two implementations ship:

* :class:`MockEmbedder` — deterministic and offline. Inputs are hashed into
  a seeded pseudo-random unit vector, so every test and mock pipeline run is
  bit-reproducible without model weights or network access.
* :class:`HttpEmbedder` — client for a remote embedding HTTP service, for
  running the pipeline against a real encoder.

All embeddings handled by the package are L2-normalized at creation time;
downstream code may assume unit norm.
"""

from __future__ import annotations

import base64
import hashlib
import io
from abc import ABC, abstractmethod

import numpy as np

from .errors import EmbeddingError

DEFAULT_DIM = 512

# Norm slack tolerated on vectors that claim to be normalized already.
NORM_TOLERANCE = 1e-6

# PNG text-chunk key used by the mock backend to hand a precomputed
# embedding to the mock embedder (see generation.MockBackend).
MOCK_PAYLOAD_KEY = "cadprompt-embedding"


def as_unit_vector(values, dim: int | None = None) -> np.ndarray:
    """Validate *values* as an embedding and return it L2-normalized.

    Rejects non-finite entries, zero vectors, and (when *dim* is given)
    dimension mismatches.
    """
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise EmbeddingError(f"embedding must be a 1-D vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise EmbeddingError(f"embedding has dimension {vec.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(vec)):
        raise EmbeddingError("embedding contains non-finite entries")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbeddingError("embedding has zero norm")
    return vec / norm


def check_unit_vector(values, dim: int | None = None) -> np.ndarray:
    """Like :func:`as_unit_vector` but requires the input to already be
    normalized to within ``NORM_TOLERANCE``. Used when loading stored data,
    where a norm drift indicates corruption rather than raw input."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise EmbeddingError(f"embedding must be a 1-D vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise EmbeddingError(f"embedding has dimension {vec.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(vec)):
        raise EmbeddingError("embedding contains non-finite entries")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise EmbeddingError(f"embedding is not normalized (norm={norm!r})")
    return vec


class Embedder(ABC):
    """Maps text and image bytes into one shared unit-vector space."""

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray:
        """Return the unit embedding of *text*."""

    @abstractmethod
    def embed_image(self, data: bytes) -> np.ndarray:
        """Return the unit embedding of encoded image bytes."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Embedding dimensionality."""

    @property
    @abstractmethod
    def embedder_id(self) -> str:
        """Stable identifier recorded in corpora built with this embedder."""


class MockEmbedder(Embedder):
    """Deterministic stand-in for a real text/image encoder.

    Each input is hashed (together with the embedder seed) into a PCG64
    stream that drives a standard-normal draw, then L2-normalized. Identical
    inputs always map to identical vectors; distinct inputs are effectively
    random unit vectors.

    Image bytes carrying a PNG text chunk under ``MOCK_PAYLOAD_KEY`` are
    decoded instead of hashed, which lets the mock generation backend control
    the embedding of the images it emits.
    """

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 0):
        if dim <= 0:
            raise EmbeddingError(f"embedding dimension must be positive, got {dim}")
        self._dim = int(dim)
        self._seed = int(seed)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def embedder_id(self) -> str:
        return f"mock-{self._dim}-{self._seed}"

    @classmethod
    def from_id(cls, embedder_id: str) -> "MockEmbedder":
        """Reconstruct a mock embedder from its recorded identifier."""
        parts = embedder_id.split("-")
        if len(parts) != 3 or parts[0] != "mock":
            raise EmbeddingError(f"not a mock embedder id: {embedder_id!r}")
        try:
            return cls(dim=int(parts[1]), seed=int(parts[2]))
        except ValueError as exc:
            raise EmbeddingError(f"not a mock embedder id: {embedder_id!r}") from exc

    def _draw(self, material: bytes) -> np.ndarray:
        digest = hashlib.blake2b(
            material, digest_size=16, key=str(self._seed).encode()
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        vec = rng.standard_normal(self._dim)
        return as_unit_vector(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._draw(b"text:" + text.encode("utf-8"))

    def embed_image(self, data: bytes) -> np.ndarray:
        payload = extract_payload_embedding(data)
        if payload is not None:
            # Stored normalized by the backend; validate without touching the
            # bits so embed_image(generated_png) returns it exactly.
            return check_unit_vector(payload, dim=self._dim)
        return self._draw(b"image:" + data)


class HttpEmbedder(Embedder):
    """Client for an embedding HTTP service.

    Expected endpoints::

        GET  /info                     -> {"dim": int, "id": str}
        POST /embed/text  {"text": s}  -> {"embedding": [...]}
        POST /embed/image {"image_b64": s} -> {"embedding": [...]}
    """

    def __init__(self, base_url: str, client=None, timeout: float = 30.0):
        import httpx

        self._client = client or httpx.Client(base_url=base_url, timeout=timeout)
        info = self._client.get("/info")
        info.raise_for_status()
        body = info.json()
        self._dim = int(body["dim"])
        self._id = str(body["id"])

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def embedder_id(self) -> str:
        return self._id

    def _post(self, path: str, payload: dict) -> np.ndarray:
        resp = self._client.post(path, json=payload)
        resp.raise_for_status()
        return as_unit_vector(resp.json()["embedding"], dim=self._dim)

    def embed_text(self, text: str) -> np.ndarray:
        return self._post("/embed/text", {"text": text})

    def embed_image(self, data: bytes) -> np.ndarray:
        return self._post(
            "/embed/image", {"image_b64": base64.b64encode(data).decode("ascii")}
        )


def encode_payload_embedding(vec: np.ndarray) -> str:
    """Serialize an embedding for transport inside a PNG text chunk."""
    raw = np.asarray(vec, dtype=np.float64).tobytes()
    return base64.b64encode(raw).decode("ascii")


def decode_payload_embedding(text: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"))
    return np.frombuffer(raw, dtype=np.float64).copy()


def extract_payload_embedding(data: bytes) -> np.ndarray | None:
    """Return the embedding carried in a mock-generated PNG, if any."""
    if not data.startswith(b"\x89PNG"):
        return None
    from PIL import Image

    try:
        with Image.open(io.BytesIO(data)) as img:
            text = getattr(img, "text", {}).get(MOCK_PAYLOAD_KEY)
    except Exception:
        return None
    if text is None:
        return None
    try:
        return decode_payload_embedding(text)
    except ValueError:
        return None
