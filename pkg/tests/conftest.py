import json

import numpy as np
import pytest
from PIL import Image

from cadprompt.corpus import CorpusEntry, CorpusStore, ingest_corpus
from cadprompt.embedding import MockEmbedder


@pytest.fixture
def embedder():
    return MockEmbedder(dim=32, seed=7)


@pytest.fixture
def make_image_dir(tmp_path):
    """Factory: write n tiny PNGs plus a manifest, return the manifest path."""

    def _make(n, seed=0, subdir="corpus"):
        root = tmp_path / subdir
        root.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(seed)
        images = []
        for i in range(n):
            name = f"img-{i:03d}.png"
            pixels = rng.integers(0, 256, size=(12, 12, 3), dtype=np.uint8)
            Image.fromarray(pixels, mode="RGB").save(root / name)
            images.append({"image_id": f"img-{i:03d}", "uri": name, "metadata": {}})
        manifest = root / "manifest.json"
        manifest.write_text(json.dumps({"images": images}))
        return manifest

    return _make


@pytest.fixture
def small_store(make_image_dir, embedder):
    return ingest_corpus(make_image_dir(6, seed=1), embedder)


def synthetic_store(embedder, vectors, prefix="v"):
    """Corpus store built directly from given vectors (no files involved)."""
    from cadprompt.embedding import as_unit_vector

    entries = [
        CorpusEntry(
            image_id=f"{prefix}{i:03d}",
            uri=f"memory://{prefix}{i:03d}",
            embedding=as_unit_vector(v),
        )
        for i, v in enumerate(vectors)
    ]
    return CorpusStore(dim=len(vectors[0]), embedder_id=embedder.embedder_id, entries=entries)
