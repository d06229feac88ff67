import json

import numpy as np
import pytest

from cadprompt.corpus import ingest_corpus, load_corpus, save_corpus
from cadprompt.embedding import MockEmbedder
from cadprompt.errors import CorpusError


def test_ingest_counts_and_order(make_image_dir, embedder):
    manifest = make_image_dir(3, seed=2)
    store = ingest_corpus(manifest, embedder)
    assert len(store) == 3
    assert store.dim == embedder.dim
    assert store.embedder_id == embedder.embedder_id
    assert [e.image_id for e in store.entries] == ["img-000", "img-001", "img-002"]
    for entry in store.entries:
        assert np.linalg.norm(entry.embedding) == pytest.approx(1.0, abs=1e-6)


def test_ingest_rejects_duplicate_id(make_image_dir, embedder):
    manifest = make_image_dir(2, seed=0)
    doc = json.loads(manifest.read_text())
    doc["images"][1]["image_id"] = "a"
    doc["images"][0]["image_id"] = "a"
    manifest.write_text(json.dumps(doc))
    with pytest.raises(CorpusError, match="'a'"):
        ingest_corpus(manifest, embedder)


def test_ingest_rejects_unreadable_image(make_image_dir, embedder):
    manifest = make_image_dir(2, seed=0)
    doc = json.loads(manifest.read_text())
    doc["images"][1]["uri"] = "missing.png"
    manifest.write_text(json.dumps(doc))
    with pytest.raises(CorpusError, match="missing.png"):
        ingest_corpus(manifest, embedder)


def test_ingest_at_corpus_scale(tmp_path, make_image_dir, embedder):
    """4800 manifest entries (all pointing at one file) ingest into 4800
    distinct corpus entries."""
    manifest = make_image_dir(1, seed=0)
    uri = json.loads(manifest.read_text())["images"][0]["uri"]
    records = [
        {"image_id": f"bike-{i:04d}", "uri": str(manifest.parent / uri), "metadata": {}}
        for i in range(4800)
    ]
    store = ingest_corpus(records, embedder)
    assert len(store) == 4800


def test_save_load_round_trip_is_identity(tmp_path, make_image_dir, embedder):
    store = ingest_corpus(make_image_dir(3, seed=4), embedder)
    path = tmp_path / "corpus.json"
    save_corpus(store, path)
    loaded = load_corpus(path)
    assert loaded.dim == store.dim
    assert loaded.embedder_id == store.embedder_id
    assert [e.image_id for e in loaded.entries] == [e.image_id for e in store.entries]
    for a, b in zip(loaded.entries, store.entries):
        assert a.uri == b.uri
        assert a.metadata == b.metadata
        assert np.array_equal(a.embedding, b.embedding)  # bit-identical


def test_save_load_idempotent(tmp_path, make_image_dir, embedder):
    store = ingest_corpus(make_image_dir(3, seed=4), embedder)
    p1 = tmp_path / "c1.json"
    p2 = tmp_path / "c2.json"
    save_corpus(store, p1)
    save_corpus(load_corpus(p1), p2)
    assert p1.read_text() == p2.read_text()


def test_load_rejects_version_mismatch(tmp_path, make_image_dir, embedder):
    store = ingest_corpus(make_image_dir(2, seed=4), embedder)
    path = tmp_path / "corpus.json"
    save_corpus(store, path)
    doc = json.loads(path.read_text())
    doc["version"] = "corpus/0"
    path.write_text(json.dumps(doc))
    with pytest.raises(CorpusError, match="version"):
        load_corpus(path)


def test_load_names_corrupted_record_index(tmp_path, make_image_dir, embedder):
    store = ingest_corpus(make_image_dir(3, seed=4), embedder)
    path = tmp_path / "corpus.json"
    save_corpus(store, path)
    doc = json.loads(path.read_text())
    # truncate the last record's embedding
    doc["entries"][2]["embedding"] = doc["entries"][2]["embedding"][:5]
    path.write_text(json.dumps(doc))
    with pytest.raises(CorpusError, match="index 2"):
        load_corpus(path)


def test_load_rejects_denormalized_record(tmp_path, make_image_dir, embedder):
    store = ingest_corpus(make_image_dir(2, seed=4), embedder)
    path = tmp_path / "corpus.json"
    save_corpus(store, path)
    doc = json.loads(path.read_text())
    doc["entries"][1]["embedding"] = [v * 2 for v in doc["entries"][1]["embedding"]]
    path.write_text(json.dumps(doc))
    with pytest.raises(CorpusError, match="index 1"):
        load_corpus(path)


def test_dimension_mismatch_rejected(make_image_dir):
    from cadprompt.errors import EmbeddingError

    manifest = make_image_dir(2, seed=0)

    class LyingEmbedder(MockEmbedder):
        @property
        def dim(self):
            return 99

    with pytest.raises(EmbeddingError, match="dimension"):
        ingest_corpus(manifest, LyingEmbedder(dim=32, seed=0))
