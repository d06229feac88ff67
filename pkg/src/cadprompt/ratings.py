"""Likert rating records and their JSON-lines store.

One record captures one rater's judgment of one artifact on the two 7-point
scales (feasibility, novelty) plus how long the judgment took. The on-disk
form is append-only JSON-lines: the survey service appends durably before
acknowledging, and analyses read a snapshot.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import RatingsError

LIKERT_MIN = 1
LIKERT_MAX = 7


@dataclass(frozen=True)
class RatingRecord:
    rater_id: str
    artifact_id: str
    feasibility: int
    novelty: int
    elapsed_ms: int = 0

    def __post_init__(self):
        for name, score in [("feasibility", self.feasibility), ("novelty", self.novelty)]:
            if not isinstance(score, int) or not LIKERT_MIN <= score <= LIKERT_MAX:
                raise RatingsError(
                    f"{name} must be an integer in "
                    f"{{{LIKERT_MIN},...,{LIKERT_MAX}}}, got {score!r}"
                )
        if self.elapsed_ms < 0:
            raise RatingsError(f"elapsed_ms must be >= 0, got {self.elapsed_ms}")

    def to_dict(self) -> dict:
        return {
            "rater_id": self.rater_id,
            "artifact_id": self.artifact_id,
            "feasibility": self.feasibility,
            "novelty": self.novelty,
            "elapsed_ms": self.elapsed_ms,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RatingRecord":
        try:
            return cls(
                rater_id=str(doc["rater_id"]),
                artifact_id=str(doc["artifact_id"]),
                feasibility=int(doc["feasibility"]),
                novelty=int(doc["novelty"]),
                elapsed_ms=int(doc.get("elapsed_ms", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RatingsError(f"malformed rating record: {exc}") from exc


def load_ratings(path: str | Path) -> list[RatingRecord]:
    """Read a ratings JSONL file, enforcing (rater, artifact) uniqueness."""
    path = Path(path)
    if not path.exists():
        raise RatingsError(f"no ratings file at {path}")
    records: list[RatingRecord] = []
    seen: set[tuple[str, str]] = set()
    for i, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            record = RatingRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, RatingsError) as exc:
            raise RatingsError(f"bad rating at line {i} in {path}: {exc}") from exc
        key = (record.rater_id, record.artifact_id)
        if key in seen:
            raise RatingsError(f"duplicate rating at line {i} in {path}: {key}")
        seen.add(key)
        records.append(record)
    return records


class RatingStore:
    """Append-only rating log with (rater, artifact) uniqueness.

    ``append`` is durable: the line is flushed and fsynced before the call
    returns, so an acknowledged rating survives a crash.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: list[RatingRecord] = []
        self._seen: set[tuple[str, str]] = set()
        if self.path.exists():
            for record in load_ratings(self.path):
                self._records.append(record)
                self._seen.add((record.rater_id, record.artifact_id))

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[RatingRecord]:
        return list(self._records)

    def has(self, rater_id: str, artifact_id: str) -> bool:
        return (rater_id, artifact_id) in self._seen

    def count_for_rater(self, rater_id: str) -> int:
        return sum(1 for r in self._records if r.rater_id == rater_id)

    def append(self, record: RatingRecord) -> None:
        key = (record.rater_id, record.artifact_id)
        if key in self._seen:
            raise RatingsError(f"duplicate rating for {key}")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(json.dumps(record.to_dict()) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._records.append(record)
        self._seen.add(key)


def elapsed_by_rater(records: list[RatingRecord]) -> dict[str, list[int]]:
    """Per-rater list of elapsed milliseconds, in record order."""
    out: dict[str, list[int]] = {}
    for record in records:
        out.setdefault(record.rater_id, []).append(record.elapsed_ms)
    return out
