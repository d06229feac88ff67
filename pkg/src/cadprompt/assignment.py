"""Balanced rater assignment.

Every artifact must be judged by exactly ``per_image_count`` raters and
every rater must judge exactly ``per_rater_count`` distinct artifacts, which
is only possible when ``n_images * per_image_count == n_raters *
per_rater_count``. Construction is greedy dealing: raters are processed in
order, and each rater takes the images with the highest remaining
multiplicity (seeded random tie-breaks). Greedy always succeeds for feasible
parameters: at most ``per_rater_count`` images can ever be at the critical
multiplicity, and the max-first rule serves all of them before any other.

Each rater's final list is then shuffled with the same seeded generator, so
presentation order is random but reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AssignmentError

ASSIGNMENT_VERSION = "assignment/1"


@dataclass(frozen=True)
class AssignmentParams:
    n_images: int
    n_raters: int
    per_rater_count: int
    per_image_count: int
    seed: int


@dataclass
class AssignmentPlan:
    """Per-rater ordered artifact lists satisfying the balance invariants."""

    per_rater: dict[str, list[str]]
    params: AssignmentParams


def validate_params(
    n_images: int, n_raters: int, per_rater_count: int, per_image_count: int
) -> None:
    """Reject infeasible parameters, naming the violated condition."""
    for name, value in [
        ("n_images", n_images),
        ("n_raters", n_raters),
        ("per_rater_count", per_rater_count),
        ("per_image_count", per_image_count),
    ]:
        if value < 1:
            raise AssignmentError(f"{name} must be >= 1, got {value}")
    lhs = n_images * per_image_count
    rhs = n_raters * per_rater_count
    if lhs != rhs:
        raise AssignmentError(
            "infeasible: n_images * per_image_count != n_raters * per_rater_count "
            f"({n_images} * {per_image_count} = {lhs} != {rhs} = "
            f"{n_raters} * {per_rater_count})"
        )
    if per_image_count > n_raters:
        raise AssignmentError(
            f"infeasible: per_image_count ({per_image_count}) exceeds "
            f"n_raters ({n_raters}); an image cannot be rated twice by one rater"
        )
    if per_rater_count > n_images:
        raise AssignmentError(
            f"infeasible: per_rater_count ({per_rater_count}) exceeds "
            f"n_images ({n_images}); a rater cannot rate an image twice"
        )


def build_assignment(
    n_images: int,
    n_raters: int,
    per_rater_count: int,
    per_image_count: int,
    seed: int,
    image_ids: list[str] | None = None,
    rater_ids: list[str] | None = None,
) -> AssignmentPlan:
    """Deal images to raters so both balance invariants hold exactly.

    Default ids are ``img-0001``.../``rater-01``...; pass real artifact ids
    to assign an actual run.
    """
    validate_params(n_images, n_raters, per_rater_count, per_image_count)
    if image_ids is None:
        image_ids = [f"img-{i:04d}" for i in range(n_images)]
    elif len(image_ids) != n_images:
        raise AssignmentError(
            f"got {len(image_ids)} image ids for n_images={n_images}"
        )
    if len(set(image_ids)) != len(image_ids):
        raise AssignmentError("image ids must be unique")
    if rater_ids is None:
        rater_ids = [f"rater-{i:02d}" for i in range(n_raters)]
    elif len(rater_ids) != n_raters:
        raise AssignmentError(f"got {len(rater_ids)} rater ids for n_raters={n_raters}")
    if len(set(rater_ids)) != len(rater_ids):
        raise AssignmentError("rater ids must be unique")

    rng = np.random.default_rng(seed)
    remaining = np.full(n_images, per_image_count, dtype=np.int64)
    per_rater: dict[str, list[str]] = {}
    for rater_id in rater_ids:
        # Within one rater the sequential argmax picks are exactly the top
        # per_rater_count images by remaining multiplicity, random tie-break.
        tiebreak = rng.random(n_images)
        order = np.lexsort((tiebreak, -remaining))
        picks = order[:per_rater_count]
        if remaining[picks[-1]] <= 0:
            raise AssignmentError(
                "greedy dealing ran out of images; parameters should have been "
                "rejected as infeasible"
            )
        remaining[picks] -= 1
        chosen = [image_ids[i] for i in picks]
        rng.shuffle(chosen)
        per_rater[rater_id] = chosen
    if remaining.any():
        raise AssignmentError("greedy dealing left images unassigned")
    return AssignmentPlan(
        per_rater=per_rater,
        params=AssignmentParams(
            n_images=n_images,
            n_raters=n_raters,
            per_rater_count=per_rater_count,
            per_image_count=per_image_count,
            seed=seed,
        ),
    )


def verify_assignment(plan: AssignmentPlan) -> None:
    """Check every plan invariant; raises on any violation."""
    params = plan.params
    if len(plan.per_rater) != params.n_raters:
        raise AssignmentError(
            f"plan has {len(plan.per_rater)} raters, expected {params.n_raters}"
        )
    counts: dict[str, int] = {}
    for rater_id, images in plan.per_rater.items():
        if len(images) != params.per_rater_count:
            raise AssignmentError(
                f"rater {rater_id!r} has {len(images)} images, "
                f"expected {params.per_rater_count}"
            )
        if len(set(images)) != len(images):
            raise AssignmentError(f"rater {rater_id!r} has duplicate images")
        for image_id in images:
            counts[image_id] = counts.get(image_id, 0) + 1
    if len(counts) != params.n_images:
        raise AssignmentError(
            f"plan covers {len(counts)} images, expected {params.n_images}"
        )
    for image_id, count in counts.items():
        if count != params.per_image_count:
            raise AssignmentError(
                f"image {image_id!r} assigned to {count} raters, "
                f"expected {params.per_image_count}"
            )


def save_assignment(plan: AssignmentPlan, path: str | Path) -> None:
    doc = {
        "version": ASSIGNMENT_VERSION,
        "params": {
            "n_images": plan.params.n_images,
            "n_raters": plan.params.n_raters,
            "per_rater_count": plan.params.per_rater_count,
            "per_image_count": plan.params.per_image_count,
            "seed": plan.params.seed,
        },
        "per_rater": plan.per_rater,
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_assignment(path: str | Path) -> AssignmentPlan:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise AssignmentError(f"cannot read assignment file {path}: {exc}") from exc
    if doc.get("version") != ASSIGNMENT_VERSION:
        raise AssignmentError(
            f"assignment file {path} has version {doc.get('version')!r}, "
            f"expected {ASSIGNMENT_VERSION!r}"
        )
    try:
        plan = AssignmentPlan(
            per_rater={k: list(v) for k, v in doc["per_rater"].items()},
            params=AssignmentParams(**doc["params"]),
        )
    except (KeyError, TypeError) as exc:
        raise AssignmentError(f"malformed assignment file {path}: {exc}") from exc
    verify_assignment(plan)
    return plan
