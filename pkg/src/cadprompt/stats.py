"""Nonparametric statistics for the rating analyses.

Everything here operates on per-image mean ratings (the unit of analysis for
setting comparisons) and uses rank-based methods:

* Mann-Whitney U for pairwise setting differences. Small untied samples get
  an exact p by enumerating all labelings; otherwise a tie-corrected normal
  approximation without continuity correction. Z is signed so that Z < 0
  when the first sample ranks below the second.
* Spearman rank correlation (average ranks, Pearson over rank vectors, t
  approximation for p) for the weight-response and the feasibility-novelty
  tradeoff.

All tests report two-tailed p values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from statistics import median
from typing import Iterable, Literal, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import stdtr

from .errors import StatsError
from .genplan import SettingSpec, SettingVariant
from .ratings import RatingRecord

# Largest pooled sample for which the exact Mann-Whitney null distribution is
# enumerated (C(16, 8) = 12870 labelings at worst).
EXACT_LIMIT = 16

Dimension = Literal["feasibility", "novelty"]


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """Fractional ranks 1..n; tied values share the mean of their ranks."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr), dtype=np.float64)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # positions i..j (0-based) share ranks i+1..j+1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _normal_sf_two_tailed(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def _tie_term(pooled_ranks: np.ndarray) -> float:
    """Sum of t^3 - t over tie groups of the pooled sample."""
    _, counts = np.unique(pooled_ranks, return_counts=True)
    return float(np.sum(counts.astype(np.float64) ** 3 - counts))


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    z: float
    p_two_tailed: float
    method: Literal["exact", "normal_approx"]
    n_a: int
    n_b: int

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "z": self.z,
            "p_two_tailed": self.p_two_tailed,
            "method": self.method,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "continuity_correction": False,
            "tie_correction": True,
        }


def mann_whitney(a: Iterable[float], b: Iterable[float]) -> MannWhitneyResult:
    """Two-tailed Mann-Whitney U test of samples *a* and *b*.

    U is sample a's statistic, from pooled average ranks. With at most
    ``EXACT_LIMIT`` pooled observations and no ties, p is exact: the fraction
    of all C(n_a + n_b, n_a) labelings whose U deviates from the null mean at
    least as much as the observed one. Otherwise p comes from the normal
    approximation with tie-corrected variance and no continuity correction.
    """
    xs = [float(v) for v in a]
    ys = [float(v) for v in b]
    n_a, n_b = len(xs), len(ys)
    if n_a == 0 or n_b == 0:
        raise StatsError("mann_whitney requires nonempty samples")
    pooled = np.asarray(xs + ys, dtype=np.float64)
    if not np.all(np.isfinite(pooled)):
        raise StatsError("mann_whitney requires finite values")
    ranks = average_ranks(pooled)
    rank_sum_a = float(np.sum(ranks[:n_a]))
    u_a = rank_sum_a - n_a * (n_a + 1) / 2.0

    n = n_a + n_b
    mean_u = n_a * n_b / 2.0
    tie_term = _tie_term(pooled)
    has_ties = tie_term > 0.0
    variance = (n_a * n_b / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    sd = math.sqrt(variance) if variance > 0 else 0.0
    z = (u_a - mean_u) / sd if sd > 0 else 0.0

    if n <= EXACT_LIMIT and not has_ties:
        # Ranks are the integers 1..n; compare integer deviations 2U - n_a*n_b
        # so the count is exact.
        observed_dev = abs(int(round(2 * u_a)) - n_a * n_b)
        offset = n_a * (n_a + 1) // 2
        extreme = 0
        total = 0
        for combo in combinations(range(1, n + 1), n_a):
            u = sum(combo) - offset
            if abs(2 * u - n_a * n_b) >= observed_dev:
                extreme += 1
            total += 1
        return MannWhitneyResult(
            u=u_a, z=z, p_two_tailed=extreme / total, method="exact", n_a=n_a, n_b=n_b
        )

    p = _normal_sf_two_tailed(z) if sd > 0 else 1.0
    return MannWhitneyResult(
        u=u_a, z=z, p_two_tailed=min(1.0, p), method="normal_approx", n_a=n_a, n_b=n_b
    )


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_two_tailed: float
    n: int

    def to_dict(self) -> dict:
        return {"rho": self.rho, "p_two_tailed": self.p_two_tailed, "n": self.n}


def spearman(pairs: Iterable[tuple[float, float]]) -> SpearmanResult:
    """Spearman rank correlation with average ranks for ties.

    rho is the Pearson correlation of the two rank vectors; p uses the
    t approximation with n - 2 degrees of freedom.
    """
    pts = [(float(x), float(y)) for x, y in pairs]
    n = len(pts)
    if n < 3:
        raise StatsError(f"spearman requires at least 3 pairs, got {n}")
    xs = np.asarray([p[0] for p in pts])
    ys = np.asarray([p[1] for p in pts])
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise StatsError("spearman requires finite values")
    if np.unique(xs).size < 2 or np.unique(ys).size < 2:
        raise StatsError("spearman is undefined when x or y is constant")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    rho = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) >= 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return SpearmanResult(rho=rho, p_two_tailed=p, n=n)


class ImageMeans(NamedTuple):
    mean_feasibility: float
    mean_novelty: float
    n: int


def mean_ratings(records: Iterable[RatingRecord]) -> dict[str, ImageMeans]:
    """Arithmetic mean feasibility and novelty per artifact."""
    sums: dict[str, list[float]] = {}
    for record in records:
        acc = sums.setdefault(record.artifact_id, [0.0, 0.0, 0])
        acc[0] += record.feasibility
        acc[1] += record.novelty
        acc[2] += 1
    return {
        artifact_id: ImageMeans(f_sum / n, n_sum / n, n)
        for artifact_id, (f_sum, n_sum, n) in sums.items()
    }


def _pick(means: ImageMeans, dimension: Dimension) -> float:
    if dimension == "feasibility":
        return means.mean_feasibility
    if dimension == "novelty":
        return means.mean_novelty
    raise StatsError(f"unknown dimension {dimension!r}")


def weight_correlation(
    per_image_means: Mapping[str, ImageMeans],
    setting_map: Mapping[str, SettingSpec],
    dimension: Dimension,
) -> SpearmanResult:
    """Rank correlation between CAD-prompt weight and mean rating.

    The enhancer-only setting counts as weight 0 (it is the proper no-CAD
    baseline, since CIP always stacks on the enhancer); plain-base images are
    excluded entirely.
    """
    pairs: list[tuple[float, float]] = []
    saw_zero = saw_cip = False
    for artifact_id, means in per_image_means.items():
        setting = setting_map.get(artifact_id)
        if setting is None:
            raise StatsError(f"no setting known for artifact {artifact_id!r}")
        if setting.variant is SettingVariant.BASE:
            continue
        if setting.variant is SettingVariant.BASE_ENHANCED:
            weight = 0.0
            saw_zero = True
        else:
            weight = float(setting.weight)
            saw_cip = True
        pairs.append((weight, _pick(means, dimension)))
    if not saw_zero:
        raise StatsError("weight correlation needs enhancer-only (weight 0) images")
    if not saw_cip:
        raise StatsError("weight correlation needs CAD-prompted images")
    return spearman(pairs)


def tradeoff_correlation(
    per_image_means: Mapping[str, ImageMeans]
) -> SpearmanResult:
    """Rank correlation between mean feasibility and mean novelty per image."""
    pairs = [
        (means.mean_feasibility, means.mean_novelty)
        for means in per_image_means.values()
    ]
    return spearman(pairs)


def quality_flags(
    sessions: Mapping[str, Sequence[int]], min_ms_per_image: int
) -> list[str]:
    """Raters whose median time per image is under the threshold.

    Flag-only: callers decide what to do with flagged raters; nothing is
    deleted here.
    """
    flagged = [
        rater_id
        for rater_id, elapsed in sessions.items()
        if elapsed and median(elapsed) < min_ms_per_image
    ]
    return sorted(flagged)
