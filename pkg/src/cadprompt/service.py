"""HTTP survey service: serve rater assignments, collect ratings, and back
the designer console.

The rating protocol is strictly sequential: each rater sees one image at a
time in their assigned order, must answer both 7-point scales, and cannot go
back or skip. A rating is appended durably to the ratings log before it is
acknowledged, so a service restart never loses an acknowledged rating — all
session state (the cursor) is derived from the assignment plan plus the log.

The designer endpoints expose the retrieve-then-generate loop for
interactive prompt/weight steering; they are pure clients of the same
retrieval and backend machinery the batch pipeline uses.
"""

# No `from __future__ import annotations` here: FastAPI must evaluate the
# request-model annotations of the endpoints defined inside create_app.

import base64
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .assignment import AssignmentPlan, load_assignment
from .corpus import CorpusStore, load_corpus
from .embedding import Embedder, MockEmbedder
from .errors import SurveyError, WorkbenchError
from .generation import GenerationBackend, HttpBackend, MockBackend, load_artifact_index
from .genplan import GenerationParams, WEIGHT_MAX, WEIGHT_MIN, cip_label, derive_seed
from .ratings import LIKERT_MAX, LIKERT_MIN, RatingRecord, RatingStore
from .retrieval import top_1

DEFAULT_DEFINITIONS = {
    "feasibility": (
        "Feasible: the design could realistically be manufactured and would "
        "function as a working bike."
    ),
    "novelty": (
        "Novel: the design is new and original, unlike typical existing bikes."
    ),
}


class UnknownRaterError(SurveyError):
    pass


class SessionCompleteError(SurveyError):
    pass


class OutOfOrderError(SurveyError):
    pass


class DuplicateRatingError(SurveyError):
    pass


@dataclass
class NextItem:
    artifact_id: str | None
    done: int
    total: int

    @property
    def complete(self) -> bool:
        return self.artifact_id is None


class SurveyCoordinator:
    """Sequential-rating protocol over an assignment plan and a rating log.

    Cursor state is never stored separately: a rater's cursor is the number
    of their persisted ratings, and submissions are only accepted for the
    artifact at the cursor. That makes the coordinator restart-safe by
    construction.
    """

    def __init__(self, assignment: AssignmentPlan, store: RatingStore):
        self.assignment = assignment
        self.store = store
        self._cursors: dict[str, int] = {}
        self._locks: dict[str, threading.Lock] = {}
        for rater_id, images in assignment.per_rater.items():
            rated = [
                r.artifact_id for r in store.records if r.rater_id == rater_id
            ]
            if set(rated) != set(images[: len(rated)]):
                raise SurveyError(
                    f"ratings on disk for rater {rater_id!r} do not form a prefix "
                    "of their assigned order; wrong ratings file?"
                )
            self._cursors[rater_id] = len(rated)
            self._locks[rater_id] = threading.Lock()

    def _require_rater(self, rater_id: str) -> list[str]:
        images = self.assignment.per_rater.get(rater_id)
        if images is None:
            raise UnknownRaterError(f"unknown rater {rater_id!r}")
        return images

    def get_next(self, rater_id: str) -> NextItem:
        """The artifact the rater should judge now; idempotent between
        submissions. ``artifact_id`` is None once the session is complete."""
        images = self._require_rater(rater_id)
        cursor = self._cursors[rater_id]
        if cursor >= len(images):
            return NextItem(artifact_id=None, done=cursor, total=len(images))
        return NextItem(artifact_id=images[cursor], done=cursor, total=len(images))

    def submit_rating(
        self,
        rater_id: str,
        artifact_id: str,
        feasibility: int,
        novelty: int,
        elapsed_ms: int = 0,
    ) -> NextItem:
        """Persist one rating and advance the cursor.

        Both scores are required and validated; the artifact must be exactly
        the rater's current one (no skips, no revisions, no duplicates). The
        record is durable before this returns.
        """
        images = self._require_rater(rater_id)
        record = RatingRecord(
            rater_id=rater_id,
            artifact_id=artifact_id,
            feasibility=feasibility,
            novelty=novelty,
            elapsed_ms=elapsed_ms,
        )
        with self._locks[rater_id]:
            cursor = self._cursors[rater_id]
            if self.store.has(rater_id, artifact_id):
                raise DuplicateRatingError(
                    f"rater {rater_id!r} already rated {artifact_id!r}"
                )
            if cursor >= len(images):
                raise SessionCompleteError(f"rater {rater_id!r} already finished")
            expected = images[cursor]
            if artifact_id != expected:
                raise OutOfOrderError(
                    f"rating out of order: expected {expected!r}, got {artifact_id!r}"
                )
            self.store.append(record)
            self._cursors[rater_id] = cursor + 1
            return NextItem(
                artifact_id=None, done=cursor + 1, total=len(images)
            )

    def progress(self) -> dict:
        """Per-rater and per-image completion counts."""
        per_rater = {
            rater_id: {"done": self._cursors[rater_id], "total": len(images)}
            for rater_id, images in self.assignment.per_rater.items()
        }
        per_image: dict[str, int] = {}
        for record in self.store.records:
            per_image[record.artifact_id] = per_image.get(record.artifact_id, 0) + 1
        return {
            "raters": per_rater,
            "images": per_image,
            "total_ratings": len(self.store),
            "complete": all(
                v["done"] == v["total"] for v in per_rater.values()
            ),
        }


@dataclass
class DesignerConsole:
    """Retrieve-then-generate loop behind the designer endpoints."""

    corpus: CorpusStore
    embedder: Embedder
    backend: GenerationBackend
    master_seed: int = 0
    n_images: int = 4

    def retrieve(self, prompt: str) -> dict:
        if not prompt.strip():
            raise WorkbenchError("prompt must be nonempty")
        hit = top_1(self.corpus, prompt, embedder=self.embedder)
        data = Path(hit.entry.uri).read_bytes()
        return {
            "image_id": hit.entry.image_id,
            "score": hit.score,
            "image_b64": base64.b64encode(data).decode("ascii"),
        }

    def generate(self, prompt: str, weight: float | None, seed: int | None = None) -> dict:
        if not prompt.strip():
            raise WorkbenchError("prompt must be nonempty")
        if weight is not None and not WEIGHT_MIN <= weight <= WEIGHT_MAX:
            raise WorkbenchError(
                f"weight must be off or in [{WEIGHT_MIN}, {WEIGHT_MAX}], got {weight}"
            )
        params = GenerationParams(enhancer=True)
        label = cip_label(weight) if weight is not None else "SD+PM"
        cad = self.retrieve(prompt) if weight is not None else None
        cad_bytes = base64.b64decode(cad["image_b64"]) if cad else None
        master = self.master_seed if seed is None else seed
        artifacts = []
        for replicate in range(1, self.n_images + 1):
            cell_seed = derive_seed(master, prompt, label, replicate)
            image = self.backend.generate(
                prompt,
                cad_image=cad_bytes,
                weight=weight,
                params=params,
                seed=cell_seed,
            )
            artifacts.append(
                {
                    "replicate": replicate,
                    "seed": cell_seed,
                    "image_b64": base64.b64encode(image).decode("ascii"),
                }
            )
        return {
            "setting_label": label,
            "cad_preview": cad,
            "artifacts": artifacts,
        }


@dataclass
class ServiceConfig:
    """Single-file service configuration; relative paths resolve against the
    config file's directory."""

    host: str = "127.0.0.1"
    port: int = 8000
    assignment_file: str | None = None
    artifacts_index: str | None = None
    ratings_file: str = "ratings.jsonl"
    definitions: dict = field(default_factory=lambda: dict(DEFAULT_DEFINITIONS))
    min_ms_per_image: int = 2000
    corpus_file: str | None = None
    designer_seed: int = 0
    designer_backend: str = "mock"
    noise_scale: float = 0.05
    static_dir: str | None = None


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise WorkbenchError(f"cannot read service config {path}: {exc}") from exc
    config = ServiceConfig(
        host=doc.get("host", "127.0.0.1"),
        port=int(doc.get("port", 8000)),
        assignment_file=doc.get("assignment_file"),
        artifacts_index=doc.get("artifacts_index"),
        ratings_file=doc.get("ratings_file", "ratings.jsonl"),
        definitions={**DEFAULT_DEFINITIONS, **doc.get("definitions", {})},
        min_ms_per_image=int(doc.get("min_ms_per_image", 2000)),
        corpus_file=doc.get("corpus_file"),
        designer_seed=int(doc.get("designer_seed", 0)),
        designer_backend=doc.get("designer_backend", "mock"),
        noise_scale=float(doc.get("noise_scale", 0.05)),
        static_dir=doc.get("static_dir"),
    )
    base = path.parent

    def resolve(p):
        return None if p is None else str(p if Path(p).is_absolute() else base / p)

    config.assignment_file = resolve(config.assignment_file)
    config.artifacts_index = resolve(config.artifacts_index)
    config.ratings_file = resolve(config.ratings_file)
    config.corpus_file = resolve(config.corpus_file)
    config.static_dir = resolve(config.static_dir)
    return config


def create_app(
    config: ServiceConfig,
    coordinator: SurveyCoordinator | None = None,
    designer: DesignerConsole | None = None,
):
    """Assemble the FastAPI app from a config (components injectable for
    tests)."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import JSONResponse, Response
    from pydantic import BaseModel

    if coordinator is None and config.assignment_file:
        coordinator = SurveyCoordinator(
            load_assignment(config.assignment_file),
            RatingStore(config.ratings_file),
        )
    artifact_uris: dict[str, str] = {}
    if config.artifacts_index:
        for artifact in load_artifact_index(config.artifacts_index):
            artifact_uris[artifact.artifact_id] = artifact.uri
    if designer is None and config.corpus_file:
        corpus = load_corpus(config.corpus_file)
        embedder = MockEmbedder.from_id(corpus.embedder_id)
        if config.designer_backend == "mock":
            backend: GenerationBackend = MockBackend(
                embedder, noise_scale=config.noise_scale
            )
        else:
            backend = HttpBackend(config.designer_backend)
        designer = DesignerConsole(
            corpus=corpus,
            embedder=embedder,
            backend=backend,
            master_seed=config.designer_seed,
        )

    app = FastAPI(title="cadprompt survey service")

    class RatingSubmission(BaseModel):
        artifact_id: str
        feasibility: int
        novelty: int
        elapsed_ms: int = 0

    class DesignerRetrieveRequest(BaseModel):
        prompt: str

    class DesignerGenerateRequest(BaseModel):
        prompt: str
        weight: float | None = None
        seed: int | None = None

    def require(component, name: str):
        if component is None:
            raise HTTPException(
                status_code=503, detail=f"{name} is not configured on this server"
            )
        return component

    @app.exception_handler(WorkbenchError)
    def workbench_error(request, exc: WorkbenchError):
        status = 400
        if isinstance(exc, UnknownRaterError):
            status = 404
        elif isinstance(exc, (DuplicateRatingError, OutOfOrderError)):
            status = 409
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/api/definitions")
    def definitions():
        return config.definitions

    @app.get("/api/session/{rater_id}/next")
    def session_next(rater_id: str):
        coord = require(coordinator, "survey collection")
        item = coord.get_next(rater_id)
        if item.complete:
            return {
                "complete": True,
                "progress": {"done": item.done, "total": item.total},
            }
        return {
            "complete": False,
            "artifact_id": item.artifact_id,
            "image_url": f"/api/artifact/{item.artifact_id}/image",
            "definitions": config.definitions,
            "progress": {"done": item.done, "total": item.total},
        }

    @app.post("/api/session/{rater_id}/rating")
    def session_rating(rater_id: str, submission: RatingSubmission):
        coord = require(coordinator, "survey collection")
        if not (
            LIKERT_MIN <= submission.feasibility <= LIKERT_MAX
            and LIKERT_MIN <= submission.novelty <= LIKERT_MAX
        ):
            raise HTTPException(
                status_code=422,
                detail=f"scores must be integers in {LIKERT_MIN}..{LIKERT_MAX}",
            )
        item = coord.submit_rating(
            rater_id,
            submission.artifact_id,
            submission.feasibility,
            submission.novelty,
            submission.elapsed_ms,
        )
        return {"ok": True, "progress": {"done": item.done, "total": item.total}}

    @app.get("/api/artifact/{artifact_id}/image")
    def artifact_image(artifact_id: str):
        uri = artifact_uris.get(artifact_id)
        if uri is None:
            raise HTTPException(status_code=404, detail=f"unknown artifact {artifact_id!r}")
        try:
            data = Path(uri).read_bytes()
        except OSError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return Response(content=data, media_type="image/png")

    @app.get("/api/admin/progress")
    def admin_progress():
        coord = require(coordinator, "survey collection")
        return coord.progress()

    @app.post("/api/designer/retrieve")
    def designer_retrieve(request: DesignerRetrieveRequest):
        console = require(designer, "designer console")
        return console.retrieve(request.prompt)

    @app.post("/api/designer/generate")
    def designer_generate(request: DesignerGenerateRequest):
        console = require(designer, "designer console")
        return console.generate(request.prompt, request.weight, request.seed)

    if config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.static_dir, html=True))

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
