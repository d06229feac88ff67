"""Generation backends and plan execution.

The actual text-to-image model is opaque to the workbench: anything that can
turn (text, optional CAD image, optional weight, params, seed) into image
bytes works. Two backends ship:

* :class:`MockBackend` — deterministic and offline. The embedding of each
  emitted image is the weight-blend of the text and CAD-image embeddings,
  ``normalize((1 - w) * e_text + w * e_cad)``, optionally perturbed by a
  seed-derived noise vector of magnitude <= ``noise_scale``. The PNG pixels
  themselves derive from the seed. This gives the whole pipeline a testable,
  monotone weight -> similarity response without any model.
* :class:`HttpBackend` — posts multipart requests to a hosted generation
  endpoint.

Execution is resumable: every finished or failed cell is appended to a run
ledger before anything else happens, and re-running a plan skips cells the
ledger already marks complete. A failed cell never aborts the run.
"""

from __future__ import annotations

import io
import json
import os
import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

import numpy as np

from .embedding import (
    MOCK_PAYLOAD_KEY,
    Embedder,
    as_unit_vector,
    check_unit_vector,
    encode_payload_embedding,
)
from .errors import GenerationError
from .genplan import GenerationParams, GenerationPlan, SettingVariant, cell_key
from .retrieval import cosine

LEDGER_FILENAME = "ledger.jsonl"
INDEX_FILENAME = "artifacts.jsonl"
IMAGES_DIRNAME = "images"

# Internal marker mixed into the text embedding when the enhancer is on, so
# enhanced and plain generations are distinguishable in mock runs.
_ENHANCER_MARKER = "\x00enhancer\x00"


class GenerationBackend(ABC):
    """Opaque image generator."""

    @abstractmethod
    def generate(
        self,
        text: str,
        cad_image: bytes | None = None,
        weight: float | None = None,
        params: GenerationParams | None = None,
        seed: int = 0,
    ) -> bytes:
        """Produce one encoded image for the given inputs."""


class MockBackend(GenerationBackend):
    """Deterministic stand-in for a hosted diffusion service.

    Emits a small placeholder PNG whose pixels derive from the seed and whose
    embedding (as seen by the paired :class:`MockEmbedder`) follows the blend
    rule described in the module docstring. ``noise_scale=0`` disables the
    perturbation, making the weight -> CAD-similarity response exactly
    monotone.
    """

    def __init__(self, embedder: Embedder, noise_scale: float = 0.05):
        if not 0.0 <= noise_scale <= 1.0:
            raise GenerationError(f"noise_scale must be in [0, 1], got {noise_scale}")
        self._embedder = embedder
        self._noise_scale = float(noise_scale)

    def output_embedding(
        self,
        text: str,
        cad_image: bytes | None,
        weight: float | None,
        params: GenerationParams,
        seed: int,
    ) -> np.ndarray:
        """The embedding the emitted image will carry."""
        e_text = self._embedder.embed_text(
            text + _ENHANCER_MARKER if params.enhancer else text
        )
        w = 0.0
        if cad_image is not None and weight is not None:
            w = float(weight)
        if w > 0.0:
            e_cad = self._embedder.embed_image(cad_image)
            blend = as_unit_vector((1.0 - w) * e_text + w * e_cad)
        else:
            blend = e_text
        if self._noise_scale > 0.0:
            rng = np.random.default_rng(seed)
            noise = as_unit_vector(rng.standard_normal(blend.shape[0]))
            blend = as_unit_vector(blend + self._noise_scale * noise)
        return blend

    def generate(
        self,
        text: str,
        cad_image: bytes | None = None,
        weight: float | None = None,
        params: GenerationParams | None = None,
        seed: int = 0,
    ) -> bytes:
        from PIL import Image
        from PIL.PngImagePlugin import PngInfo

        params = params or GenerationParams()
        embedding = self.output_embedding(text, cad_image, weight, params, seed)
        # Placeholder pixels: seed-derived noise at 1/16 the requested size.
        w_px = max(8, params.width // 16)
        h_px = max(8, params.height // 16)
        rng = np.random.default_rng(seed)
        pixels = rng.integers(0, 256, size=(h_px, w_px, 3), dtype=np.uint8)
        info = PngInfo()
        info.add_text(MOCK_PAYLOAD_KEY, encode_payload_embedding(embedding))
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="RGB").save(buf, format="PNG", pnginfo=info)
        return buf.getvalue()


class HttpBackend(GenerationBackend):
    """Client posting multipart generation requests to a hosted endpoint.

    Request: ``POST {base_url}/generate`` with form fields ``text``,
    ``params`` (JSON), ``seed``, optional ``weight``, and an optional file
    part ``cad_image``. Response body: encoded image bytes.
    """

    def __init__(self, base_url: str, client=None, timeout: float = 120.0):
        import httpx

        self._client = client or httpx.Client(base_url=base_url, timeout=timeout)

    def generate(
        self,
        text: str,
        cad_image: bytes | None = None,
        weight: float | None = None,
        params: GenerationParams | None = None,
        seed: int = 0,
    ) -> bytes:
        params = params or GenerationParams()
        data = {
            "text": text,
            "params": json.dumps(params.to_dict()),
            "seed": str(seed),
        }
        if weight is not None:
            data["weight"] = str(weight)
        files = {}
        if cad_image is not None:
            files["cad_image"] = ("cad.png", cad_image, "image/png")
        resp = self._client.post("/generate", data=data, files=files or None)
        if resp.status_code != 200:
            raise GenerationError(
                f"backend refused generation: HTTP {resp.status_code} {resp.text[:200]}"
            )
        return resp.content


@dataclass
class GeneratedArtifact:
    """One generated image with its provenance and embedding."""

    artifact_id: str
    prompt_id: str
    setting_label: str
    replicate: int
    seed: int
    uri: str
    embedding: np.ndarray

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "prompt_id": self.prompt_id,
            "setting_label": self.setting_label,
            "replicate": self.replicate,
            "seed": self.seed,
            "uri": self.uri,
            "embedding": self.embedding.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratedArtifact":
        return cls(
            artifact_id=doc["artifact_id"],
            prompt_id=doc["prompt_id"],
            setting_label=doc["setting_label"],
            replicate=int(doc["replicate"]),
            seed=int(doc["seed"]),
            uri=doc["uri"],
            embedding=check_unit_vector(doc["embedding"]),
        )


@dataclass
class CellFailure:
    artifact_id: str
    reason: str


@dataclass
class ExecutionReport:
    """Outcome of one ``execute_plan`` call.

    ``artifacts`` covers every completed cell (including cells completed by
    earlier runs), sorted by artifact_id; ``failures`` covers only cells that
    failed in this run.
    """

    artifacts: list[GeneratedArtifact]
    failures: list[CellFailure]
    newly_generated: int


def artifact_filename(artifact_id: str) -> str:
    """Reversible, filesystem-safe file name for an artifact id."""
    return quote(artifact_id, safe="()+=,.@ ") + ".png"


def _relative_uri(uri: str, base: Path) -> str:
    """Store image uris relative to the run directory so run dirs are
    relocatable and index files are identical across runs anywhere."""
    try:
        return str(Path(uri).resolve().relative_to(base.resolve()))
    except ValueError:
        return uri


def _absolute_uri(uri: str, base: Path) -> str:
    path = Path(uri)
    return uri if path.is_absolute() else str(base / path)


def _append_ledger(path: Path, record: dict) -> None:
    with path.open("a") as fh:
        fh.write(json.dumps(record) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def read_ledger(out_dir: str | Path) -> list[dict]:
    """All ledger records in append order; missing ledger reads as empty."""
    path = Path(out_dir) / LEDGER_FILENAME
    if not path.exists():
        return []
    records = []
    for i, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise GenerationError(f"corrupted ledger line {i} in {path}: {exc}") from exc
    return records


def completed_artifacts(out_dir: str | Path) -> dict[str, GeneratedArtifact]:
    """Artifacts whose cells the ledger marks complete, keyed by id."""
    out_dir = Path(out_dir)
    done: dict[str, GeneratedArtifact] = {}
    for record in read_ledger(out_dir):
        if record.get("status") == "ok":
            artifact = GeneratedArtifact.from_dict(record["artifact"])
            artifact.uri = _absolute_uri(artifact.uri, out_dir)
            done[artifact.artifact_id] = artifact
    return done


def write_artifact_index(artifacts: list[GeneratedArtifact], out_dir: str | Path) -> Path:
    """Write the canonical artifact index, sorted by id for reproducibility."""
    out_dir = Path(out_dir)
    path = out_dir / INDEX_FILENAME
    tmp = path.with_suffix(".tmp")
    with tmp.open("w") as fh:
        for artifact in sorted(artifacts, key=lambda a: a.artifact_id):
            doc = artifact.to_dict()
            doc["uri"] = _relative_uri(doc["uri"], out_dir)
            fh.write(json.dumps(doc) + "\n")
    tmp.replace(path)
    return path


def load_artifact_index(path_or_dir: str | Path) -> list[GeneratedArtifact]:
    path = Path(path_or_dir)
    if path.is_dir():
        path = path / INDEX_FILENAME
    if not path.exists():
        raise GenerationError(f"no artifact index at {path}")
    artifacts = []
    for i, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            artifact = GeneratedArtifact.from_dict(json.loads(line))
        except Exception as exc:
            raise GenerationError(f"corrupted artifact record {i} in {path}: {exc}") from exc
        artifact.uri = _absolute_uri(artifact.uri, path.parent)
        artifacts.append(artifact)
    return artifacts


def execute_plan(
    plan: GenerationPlan,
    backend: GenerationBackend,
    embedder: Embedder,
    parallelism: int = 1,
    out_dir: str | Path = ".",
) -> ExecutionReport:
    """Run every planned cell through *backend*, recording artifacts on disk.

    Up to *parallelism* backend calls run concurrently. Each completed cell
    appends to the run ledger (durably, before the cell counts as done), so a
    crashed or partially failed run resumes by skipping completed cells.
    """
    if parallelism < 1:
        raise GenerationError(f"parallelism must be >= 1, got {parallelism}")
    out_dir = Path(out_dir)
    images_dir = out_dir / IMAGES_DIRNAME
    images_dir.mkdir(parents=True, exist_ok=True)
    ledger_path = out_dir / LEDGER_FILENAME

    done = completed_artifacts(out_dir)
    pending = [
        (pid, setting, replicate)
        for pid, setting, replicate in plan.cells()
        if cell_key(pid, setting.label, replicate) not in done
    ]

    cad_bytes: dict[str, bytes] = {}
    for pid in {pid for pid, s, _ in pending if s.variant is SettingVariant.CIP}:
        uri = plan.cad_uris.get(pid)
        if uri is None:
            raise GenerationError(f"plan has no CAD image recorded for prompt {pid!r}")
        try:
            cad_bytes[pid] = Path(uri).read_bytes()
        except OSError as exc:
            raise GenerationError(f"cannot read CAD image {uri!r}: {exc}") from exc

    lock = threading.Lock()
    new_artifacts: list[GeneratedArtifact] = []
    failures: list[CellFailure] = []

    def run_cell(pid: str, setting, replicate: int) -> None:
        artifact_id = cell_key(pid, setting.label, replicate)
        seed = plan.seeds[artifact_id]
        try:
            is_cip = setting.variant is SettingVariant.CIP
            image = backend.generate(
                plan.prompt_text(pid),
                cad_image=cad_bytes[pid] if is_cip else None,
                weight=setting.weight if is_cip else None,
                params=setting.params,
                seed=seed,
            )
            path = images_dir / artifact_filename(artifact_id)
            path.write_bytes(image)
            artifact = GeneratedArtifact(
                artifact_id=artifact_id,
                prompt_id=pid,
                setting_label=setting.label,
                replicate=replicate,
                seed=seed,
                uri=str(path),
                embedding=check_unit_vector(embedder.embed_image(image), dim=embedder.dim),
            )
        except Exception as exc:
            with lock:
                failures.append(CellFailure(artifact_id=artifact_id, reason=str(exc)))
                _append_ledger(
                    ledger_path,
                    {"status": "failed", "artifact_id": artifact_id, "reason": str(exc)},
                )
            return
        with lock:
            new_artifacts.append(artifact)
            doc = artifact.to_dict()
            doc["uri"] = _relative_uri(doc["uri"], out_dir)
            _append_ledger(ledger_path, {"status": "ok", "artifact": doc})

    if parallelism == 1:
        for cell in pending:
            run_cell(*cell)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(run_cell, *cell) for cell in pending]
            for future in futures:
                future.result()

    all_artifacts = sorted(
        list(done.values()) + new_artifacts, key=lambda a: a.artifact_id
    )
    write_artifact_index(all_artifacts, out_dir)
    return ExecutionReport(
        artifacts=all_artifacts,
        failures=failures,
        newly_generated=len(new_artifacts),
    )


def weight_similarity_curve(
    plan: GenerationPlan,
    artifacts: list[GeneratedArtifact],
    cad_embedding_for_prompt,
) -> dict[str, list[tuple[float, float]]]:
    """Per prompt: (weight, mean cosine to the prompt's CAD embedding) for
    every CIP setting, ascending by weight. Convenience for diagnostics."""
    by_cell: dict[tuple[str, str], list[GeneratedArtifact]] = {}
    for artifact in artifacts:
        by_cell.setdefault((artifact.prompt_id, artifact.setting_label), []).append(artifact)
    curves: dict[str, list[tuple[float, float]]] = {}
    for pid, _ in plan.prompts:
        e_cad = cad_embedding_for_prompt(pid)
        points = []
        for setting in plan.settings:
            if setting.variant is not SettingVariant.CIP:
                continue
            cell = by_cell.get((pid, setting.label), [])
            if not cell:
                continue
            mean = float(np.mean([cosine(a.embedding, e_cad) for a in cell]))
            points.append((float(setting.weight), mean))
        curves[pid] = sorted(points)
    return curves
