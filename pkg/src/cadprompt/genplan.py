"""Generation settings and plan expansion.

A run is described by a grid of settings crossed with a list of text
prompts. The canonical seven-setting grid is:

    SD           base model, no enhancer
    SD+PM        base model + prompt enhancer
    CIP(w)       enhancer + CAD-image prompting at weight w,
                 for w in 0.35, 0.51, 0.67, 0.83, 1

The CIP weights come from uniformly spacing the usable weight range
[0.35, 1] and truncating each value to two decimals. Per prompt, the CAD
image is retrieved once and reused by every CIP setting. Seeds for every
(prompt, setting, replicate) cell are derived from one master seed, so
re-planning never changes them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal
from enum import Enum
from pathlib import Path

from .corpus import CorpusStore
from .embedding import Embedder
from .errors import PlanError
from .retrieval import top_1

PLAN_VERSION = "plan/1"

# Usable CAD-image prompt weight range exposed by the generation backend.
WEIGHT_MIN = 0.35
WEIGHT_MAX = 1.0

# Reserved as the field separator inside cell keys and artifact ids.
KEY_SEPARATOR = ":"


class SettingVariant(str, Enum):
    BASE = "BASE"
    BASE_ENHANCED = "BASE_ENHANCED"
    CIP = "CIP"


@dataclass(frozen=True)
class GenerationParams:
    """Backend knobs held fixed across a grid.

    Defaults are the workbench's canonical fixed parameters: 4 images per
    generation at 1024x768 with guidance scale 7; enhancer strength 0.3 when
    the enhancer is on.
    """

    n_images: int = 4
    width: int = 1024
    height: int = 768
    guidance_scale: float = 7.0
    enhancer: bool = False
    enhancer_strength: float = 0.3

    def __post_init__(self):
        if self.n_images < 1:
            raise PlanError(f"n_images must be >= 1, got {self.n_images}")
        if self.width < 1 or self.height < 1:
            raise PlanError(f"invalid dimensions {self.width}x{self.height}")
        if not 0.0 <= self.enhancer_strength <= 1.0:
            raise PlanError(
                f"enhancer_strength must be in [0, 1], got {self.enhancer_strength}"
            )

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "width": self.width,
            "height": self.height,
            "guidance_scale": self.guidance_scale,
            "enhancer": self.enhancer,
            "enhancer_strength": self.enhancer_strength,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GenerationParams":
        return cls(**doc)


@dataclass(frozen=True)
class SettingSpec:
    """One generation setting: a label, a variant, and its parameters.

    ``weight`` is present iff the variant is CIP, and CIP always runs with
    the enhancer on (CAD prompting stacks on top of the enhancer, never
    replaces it).
    """

    label: str
    variant: SettingVariant
    params: GenerationParams
    weight: float | None = None

    def __post_init__(self):
        if KEY_SEPARATOR in self.label:
            raise PlanError(f"setting label may not contain {KEY_SEPARATOR!r}: {self.label!r}")
        if self.variant is SettingVariant.CIP:
            if self.weight is None:
                raise PlanError(f"CIP setting {self.label!r} requires a weight")
            if not WEIGHT_MIN <= self.weight <= WEIGHT_MAX:
                raise PlanError(
                    f"CIP weight must be in [{WEIGHT_MIN}, {WEIGHT_MAX}], "
                    f"got {self.weight}"
                )
            if not self.params.enhancer:
                raise PlanError(f"CIP setting {self.label!r} must run with the enhancer on")
        elif self.weight is not None:
            raise PlanError(f"non-CIP setting {self.label!r} may not carry a weight")

    def to_dict(self) -> dict:
        doc = {
            "label": self.label,
            "variant": self.variant.value,
            "params": self.params.to_dict(),
        }
        if self.weight is not None:
            doc["weight"] = self.weight
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SettingSpec":
        return cls(
            label=doc["label"],
            variant=SettingVariant(doc["variant"]),
            params=GenerationParams.from_dict(doc["params"]),
            weight=doc.get("weight"),
        )


def weight_grid(lo: float, hi: float, n: int) -> list[float]:
    """*n* equally spaced weights from *lo* to *hi*, truncated to 2 decimals.

    Truncation (not rounding) matches the platform's displayed weight steps:
    ``weight_grid(0.35, 1, 5) == [0.35, 0.51, 0.67, 0.83, 1.0]``. Endpoints
    are computed exactly; spacing uses decimal arithmetic so values that land
    on a hundredth never drift below it.
    """
    if n < 2:
        raise PlanError(f"weight grid needs at least 2 points, got {n}")
    if not lo < hi:
        raise PlanError(f"weight grid requires lo < hi, got lo={lo}, hi={hi}")
    d_lo = Decimal(str(lo))
    d_hi = Decimal(str(hi))
    step = (d_hi - d_lo) / (n - 1)
    cent = Decimal("0.01")
    values = []
    for i in range(n):
        raw = d_hi if i == n - 1 else d_lo + i * step
        values.append(float(raw.quantize(cent, rounding=ROUND_DOWN)))
    return values


def cip_label(weight: float) -> str:
    """Canonical label for a CIP setting, e.g. ``CIP(0.35)``, ``CIP(1)``."""
    return f"CIP({weight:g})"


def default_settings_grid(params: GenerationParams | None = None) -> list[SettingSpec]:
    """The canonical seven-setting grid: SD, SD+PM, and five CIP weights."""
    base = params or GenerationParams()
    plain = GenerationParams(**{**base.to_dict(), "enhancer": False})
    enhanced = GenerationParams(**{**base.to_dict(), "enhancer": True})
    grid = [
        SettingSpec(label="SD", variant=SettingVariant.BASE, params=plain),
        SettingSpec(label="SD+PM", variant=SettingVariant.BASE_ENHANCED, params=enhanced),
    ]
    for w in weight_grid(WEIGHT_MIN, WEIGHT_MAX, 5):
        grid.append(
            SettingSpec(
                label=cip_label(w),
                variant=SettingVariant.CIP,
                params=enhanced,
                weight=w,
            )
        )
    return grid


def cell_key(prompt_id: str, label: str, replicate: int) -> str:
    return KEY_SEPARATOR.join([prompt_id, label, str(replicate)])


def parse_cell_key(key: str) -> tuple[str, str, int]:
    parts = key.split(KEY_SEPARATOR)
    if len(parts) != 3:
        raise PlanError(f"malformed cell key: {key!r}")
    return parts[0], parts[1], int(parts[2])


def derive_seed(master_seed: int, prompt_id: str, label: str, replicate: int) -> int:
    """Deterministic per-cell seed: a pure function of its arguments.

    48-bit so seeds survive JSON round-trips through every consumer.
    """
    material = f"{master_seed}|{prompt_id}|{label}|{replicate}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(material, digest_size=6).digest(), "big")


@dataclass
class GenerationPlan:
    """Fully expanded run: prompts x settings x replicates, with seeds and
    the per-prompt CAD image chosen for the CIP settings."""

    prompts: list[tuple[str, str]]
    settings: list[SettingSpec]
    master_seed: int
    seeds: dict[str, int]
    cad_prompt: dict[str, str] = field(default_factory=dict)
    cad_uris: dict[str, str] = field(default_factory=dict)
    embedder_id: str | None = None

    @property
    def n_cells(self) -> int:
        return len(self.prompts) * sum(s.params.n_images for s in self.settings)

    def cells(self) -> list[tuple[str, SettingSpec, int]]:
        """All planned cells as (prompt_id, setting, replicate), in plan order."""
        out = []
        for prompt_id, _ in self.prompts:
            for setting in self.settings:
                for replicate in range(1, setting.params.n_images + 1):
                    out.append((prompt_id, setting, replicate))
        return out

    def prompt_text(self, prompt_id: str) -> str:
        for pid, text in self.prompts:
            if pid == prompt_id:
                return text
        raise PlanError(f"unknown prompt_id {prompt_id!r}")


def build_plan(
    prompts: list[tuple[str, str]],
    settings: list[SettingSpec],
    corpus: CorpusStore | None,
    embedder: Embedder | None,
    master_seed: int,
) -> GenerationPlan:
    """Expand prompts across settings into a deterministic plan.

    For every prompt that any CIP setting will consume, the closest CAD image
    is retrieved exactly once and shared across all CIP weights. All seeds
    derive from *master_seed*, so rebuilding with the same inputs yields a
    bit-identical plan.
    """
    if not prompts:
        raise PlanError("plan requires at least one prompt")
    seen_prompts: set[str] = set()
    for pid, _ in prompts:
        if KEY_SEPARATOR in pid:
            raise PlanError(f"prompt_id may not contain {KEY_SEPARATOR!r}: {pid!r}")
        if pid in seen_prompts:
            raise PlanError(f"duplicate prompt_id: {pid!r}")
        seen_prompts.add(pid)
    labels = [s.label for s in settings]
    if len(set(labels)) != len(labels):
        raise PlanError("setting labels must be unique within a grid")
    has_cip = any(s.variant is SettingVariant.CIP for s in settings)
    if has_cip:
        if corpus is None or len(corpus) == 0:
            raise PlanError("CIP settings require a nonempty corpus")
        if embedder is None:
            raise PlanError("CIP settings require an embedder for retrieval")

    plan = GenerationPlan(
        prompts=list(prompts),
        settings=list(settings),
        master_seed=master_seed,
        seeds={},
        embedder_id=embedder.embedder_id if embedder is not None else None,
    )
    for prompt_id, text in prompts:
        if has_cip:
            hit = top_1(corpus, text, embedder=embedder)
            plan.cad_prompt[prompt_id] = hit.entry.image_id
            plan.cad_uris[prompt_id] = hit.entry.uri
        for setting in settings:
            for replicate in range(1, setting.params.n_images + 1):
                key = cell_key(prompt_id, setting.label, replicate)
                plan.seeds[key] = derive_seed(
                    master_seed, prompt_id, setting.label, replicate
                )
    return plan


def save_plan(plan: GenerationPlan, path: str | Path) -> None:
    doc = {
        "version": PLAN_VERSION,
        "master_seed": plan.master_seed,
        "embedder_id": plan.embedder_id,
        "prompts": [{"prompt_id": pid, "text": text} for pid, text in plan.prompts],
        "settings": [s.to_dict() for s in plan.settings],
        "seeds": plan.seeds,
        "cad_prompt": plan.cad_prompt,
        "cad_uris": plan.cad_uris,
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_plan(path: str | Path) -> GenerationPlan:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanError(f"cannot read plan file {path}: {exc}") from exc
    if doc.get("version") != PLAN_VERSION:
        raise PlanError(
            f"plan file {path} has version {doc.get('version')!r}, expected {PLAN_VERSION!r}"
        )
    try:
        return GenerationPlan(
            prompts=[(p["prompt_id"], p["text"]) for p in doc["prompts"]],
            settings=[SettingSpec.from_dict(s) for s in doc["settings"]],
            master_seed=int(doc["master_seed"]),
            seeds={k: int(v) for k, v in doc["seeds"].items()},
            cad_prompt=dict(doc.get("cad_prompt", {})),
            cad_uris=dict(doc.get("cad_uris", {})),
            embedder_id=doc.get("embedder_id"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PlanError(f"malformed plan file {path}: {exc}") from exc


def load_prompts(path: str | Path) -> list[tuple[str, str]]:
    """Read a prompt file: a JSON list of ``{prompt_id, text}``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanError(f"cannot read prompts file {path}: {exc}") from exc
    if not isinstance(doc, list):
        raise PlanError(f"prompts file {path} must be a JSON list")
    try:
        return [(str(p["prompt_id"]), str(p["text"])) for p in doc]
    except (KeyError, TypeError) as exc:
        raise PlanError(f"malformed prompts file {path}: {exc}") from exc
