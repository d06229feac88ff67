import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from cadprompt.errors import StatsError
from cadprompt.genplan import default_settings_grid
from cadprompt.ratings import RatingRecord
from cadprompt.stats import (
    ImageMeans,
    average_ranks,
    mann_whitney,
    mean_ratings,
    quality_flags,
    spearman,
    tradeoff_correlation,
    weight_correlation,
)


# ---------------------------------------------------------------------------
# oracles


def pairwise_u(a, b):
    """U statistic by direct pairwise comparison (independent of ranking)."""
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def enumerate_exact_p(a, b):
    """Exact two-tailed p by enumerating which positions of the pooled data
    belong to the first sample, with U computed pairwise."""
    pooled = list(a) + list(b)
    n_a = len(a)
    n = len(pooled)
    mean_u = n_a * (n - n_a) / 2.0
    observed = abs(pairwise_u(a, b) - mean_u)
    extreme = total = 0
    for positions in combinations(range(n), n_a):
        chosen = [pooled[i] for i in positions]
        rest = [pooled[i] for i in range(n) if i not in positions]
        if abs(pairwise_u(chosen, rest) - mean_u) >= observed - 1e-12:
            extreme += 1
        total += 1
    return extreme / total


def mc_permutation_p(a, b, n_resamples, seed):
    """Monte-Carlo permutation estimate of the two-tailed p value."""
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    n_a = len(a)
    mean_u = n_a * len(b) / 2.0
    offset = n_a * (n_a + 1) / 2.0
    observed = abs(np.sum(ranks[:n_a]) - offset - mean_u)
    extreme = 0
    batch = 20000
    remaining = n_resamples
    while remaining > 0:
        size = min(batch, remaining)
        tiled = np.tile(ranks, (size, 1))
        shuffled = rng.permuted(tiled, axis=1)
        u = shuffled[:, :n_a].sum(axis=1) - offset
        extreme += int(np.sum(np.abs(u - mean_u) >= observed - 1e-9))
        remaining -= size
    return extreme / n_resamples


def two_pass_pearson(x, y):
    """Pearson correlation via an explicit two-pass loop."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sxx = syy = 0.0
    for xi, yi in zip(x, y):
        sxy += (xi - mx) * (yi - my)
        sxx += (xi - mx) ** 2
        syy += (yi - my) ** 2
    return sxy / math.sqrt(sxx * syy)


def rank_then_pearson(pairs):
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    return two_pass_pearson(list(rankdata(xs)), list(rankdata(ys)))


# ---------------------------------------------------------------------------
# ranks


def test_average_ranks_plain_and_tied():
    assert list(average_ranks([10.0, 30.0, 20.0])) == [1.0, 3.0, 2.0]
    assert list(average_ranks([5.0, 5.0, 5.0, 5.0])) == [2.5, 2.5, 2.5, 2.5]
    assert list(average_ranks([1.0, 2.0, 2.0, 3.0])) == [1.0, 2.5, 2.5, 4.0]


@given(st.lists(st.integers(min_value=0, max_value=9), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_average_ranks_match_scipy(values):
    assert np.allclose(average_ranks(values), rankdata(values))


# ---------------------------------------------------------------------------
# Mann-Whitney


def test_separated_samples_exact():
    result = mann_whitney([1, 2, 3], [4, 5, 6])
    assert result.u == 0.0
    assert result.method == "exact"
    # 2 of C(6,3)=20 labelings are as extreme (the two perfect separations)
    assert result.p_two_tailed == 2 / 20
    assert result.z < 0


def test_identical_constant_samples():
    result = mann_whitney([5, 5, 5, 5], [5, 5, 5, 5])
    assert result.z == 0.0
    assert result.p_two_tailed == 1.0


def test_swap_antisymmetry():
    rng = np.random.default_rng(0)
    a = rng.integers(1, 8, size=12).astype(float)
    b = rng.integers(1, 8, size=15).astype(float)
    fwd = mann_whitney(a, b)
    rev = mann_whitney(b, a)
    assert fwd.z == -rev.z
    assert fwd.p_two_tailed == rev.p_two_tailed
    assert fwd.u + rev.u == len(a) * len(b)


def test_z_sign_convention():
    # sample a clearly below b -> negative z
    low_first = mann_whitney([1, 1, 2, 2, 3], [5, 6, 6, 7, 7])
    assert low_first.z < 0
    assert mann_whitney([5, 6, 6, 7, 7], [1, 1, 2, 2, 3]).z > 0


def test_exact_matches_enumeration_oracle():
    rng = np.random.default_rng(1)
    for n_a, n_b in [(1, 3), (2, 2), (3, 3), (4, 3), (5, 5)]:
        values = rng.permutation(100)[: n_a + n_b].astype(float)
        a, b = values[:n_a], values[n_a:]
        result = mann_whitney(a, b)
        assert result.method == "exact"
        assert result.p_two_tailed == enumerate_exact_p(a, b)


def test_ties_force_normal_approx():
    result = mann_whitney([1, 2, 2], [2, 3, 4])
    assert result.method == "normal_approx"


def test_large_samples_use_normal_approx():
    a = list(range(1, 21))
    b = [x + 10 for x in a]
    result = mann_whitney(a, b)
    assert result.method == "normal_approx"
    assert result.z < -3
    assert result.p_two_tailed < 0.01


def test_normal_approx_matches_scipy():
    from scipy.stats import mannwhitneyu

    rng = np.random.default_rng(2)
    for _ in range(10):
        a = rng.integers(1, 8, size=rng.integers(10, 40)).astype(float)
        b = rng.integers(1, 8, size=rng.integers(10, 40)).astype(float)
        ours = mann_whitney(a, b)
        ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                           use_continuity=False)
        assert ours.u == pytest.approx(float(ref.statistic), abs=1e-9)
        assert ours.p_two_tailed == pytest.approx(float(ref.pvalue), abs=1e-12)


def test_normal_approx_matches_mc_permutation():
    rng = np.random.default_rng(3)
    a = rng.integers(1, 8, size=40).astype(float)
    b = np.clip(a[:35] + rng.integers(0, 3, size=35), 1, 7).astype(float)
    result = mann_whitney(a, b)
    estimate = mc_permutation_p(a, b, n_resamples=100_000, seed=99)
    assert result.p_two_tailed == pytest.approx(estimate, abs=0.005)


@given(st.data())
@settings(max_examples=30, deadline=None)
def test_invariant_under_monotone_transform(data):
    a = data.draw(st.lists(st.integers(1, 7), min_size=2, max_size=15))
    b = data.draw(st.lists(st.integers(1, 7), min_size=2, max_size=15))
    base = mann_whitney(a, b)
    # strictly increasing transform of the pooled scale
    transformed = mann_whitney([math.exp(x) for x in a], [math.exp(x) for x in b])
    assert transformed.u == base.u
    assert transformed.z == pytest.approx(base.z, abs=1e-9)
    assert transformed.p_two_tailed == pytest.approx(base.p_two_tailed, abs=1e-12)


def test_mann_whitney_rejects_empty():
    with pytest.raises(StatsError):
        mann_whitney([], [1.0])
    with pytest.raises(StatsError):
        mann_whitney([1.0], [])


# ---------------------------------------------------------------------------
# Spearman


def test_perfect_monotone():
    assert spearman([(1, 1), (2, 2), (3, 3)]).rho == pytest.approx(1.0)
    assert spearman([(1, 3), (2, 2), (3, 1)]).rho == pytest.approx(-1.0)
    assert spearman([(1, 1), (2, 2), (3, 3)]).p_two_tailed == 0.0


def test_matches_rank_then_pearson_oracle():
    rng = np.random.default_rng(4)
    pairs = [(float(x), float(y)) for x, y in rng.integers(0, 20, size=(10, 2))]
    if len({p[0] for p in pairs}) < 2 or len({p[1] for p in pairs}) < 2:
        pytest.skip("degenerate draw")
    result = spearman(pairs)
    assert result.rho == pytest.approx(rank_then_pearson(pairs), abs=1e-12)


def test_matches_scipy_including_p():
    from scipy.stats import spearmanr

    rng = np.random.default_rng(5)
    x = rng.integers(1, 8, size=30).astype(float)
    y = np.clip(x + rng.integers(-2, 3, size=30), 1, 7).astype(float)
    ours = spearman(list(zip(x, y)))
    ref = spearmanr(x, y)
    assert ours.rho == pytest.approx(float(ref.statistic), abs=1e-12)
    assert ours.p_two_tailed == pytest.approx(float(ref.pvalue), rel=1e-9)


def test_spearman_invariance_under_monotone_transforms():
    rng = np.random.default_rng(6)
    pairs = [(float(x), float(y)) for x, y in rng.integers(0, 50, size=(20, 2))]
    base = spearman(pairs)
    warped = spearman([(math.exp(x / 10), y**3) for x, y in pairs])
    assert warped.rho == pytest.approx(base.rho, abs=1e-12)
    assert warped.p_two_tailed == pytest.approx(base.p_two_tailed, abs=1e-12)


def test_spearman_rejections():
    with pytest.raises(StatsError):
        spearman([(1, 2), (2, 3)])
    with pytest.raises(StatsError, match="constant"):
        spearman([(1, 2), (1, 3), (1, 4)])
    with pytest.raises(StatsError, match="constant"):
        spearman([(1, 2), (2, 2), (3, 2)])


# ---------------------------------------------------------------------------
# rating aggregation and derived analyses


def rate(rater, artifact, f, n, ms=3000):
    return RatingRecord(rater_id=rater, artifact_id=artifact, feasibility=f,
                        novelty=n, elapsed_ms=ms)


def test_mean_ratings_examples():
    means = mean_ratings([rate("r1", "a", 7, 4), rate("r2", "a", 5, 4)])
    assert means["a"].mean_feasibility == 6.0
    assert means["a"].n == 2
    means = mean_ratings([rate(f"r{i}", "b", 4, 2) for i in range(10)])
    assert means["b"] == ImageMeans(4.0, 2.0, 10)
    assert mean_ratings([]) == {}


def test_mean_ratings_match_summation_oracle():
    rng = np.random.default_rng(7)
    records = [
        rate(f"r{i}", f"img{rng.integers(0, 5)}", int(rng.integers(1, 8)),
             int(rng.integers(1, 8)))
        for i in range(60)
    ]
    means = mean_ratings(records)
    for artifact_id, result in means.items():
        fs = [r.feasibility for r in records if r.artifact_id == artifact_id]
        ns = [r.novelty for r in records if r.artifact_id == artifact_id]
        assert result.mean_feasibility == pytest.approx(sum(fs) / len(fs))
        assert result.mean_novelty == pytest.approx(sum(ns) / len(ns))
        assert result.n == len(fs)


def _grid_by_label():
    return {s.label: s for s in default_settings_grid()}


def _means_for_weights(value_of_weight):
    """One artifact per non-base setting, mean rating = f(weight)."""
    grid = _grid_by_label()
    per_image = {}
    setting_map = {}
    for label, setting in grid.items():
        if label == "SD":
            weight = None
        elif label == "SD+PM":
            weight = 0.0
        else:
            weight = setting.weight
        artifact_id = f"p:{label}:1"
        value = 4.0 if weight is None else value_of_weight(weight)
        per_image[artifact_id] = ImageMeans(value, 8.0 - value, 1)
        setting_map[artifact_id] = setting
    return per_image, setting_map


def test_weight_correlation_monotone_shapes():
    inc, smap = _means_for_weights(lambda w: 1.0 + 5.0 * w)
    assert weight_correlation(inc, smap, "feasibility").rho == pytest.approx(1.0)
    dec, smap = _means_for_weights(lambda w: 6.0 - 5.0 * w)
    assert weight_correlation(dec, smap, "feasibility").rho == pytest.approx(-1.0)


def test_weight_correlation_excludes_base_and_matches_oracle():
    rng = np.random.default_rng(8)
    values = {0.0: 3.0, 0.35: 4.5, 0.51: 4.0, 0.67: 5.5, 0.83: 5.0, 1.0: 4.8}
    per_image, smap = _means_for_weights(lambda w: values[w])
    result = weight_correlation(per_image, smap, "feasibility")
    expected_pairs = [(w, v) for w, v in values.items()]
    assert result.rho == pytest.approx(rank_then_pearson(expected_pairs), abs=1e-12)
    assert result.n == 6  # SD is excluded


def test_weight_correlation_requires_weight_zero_group():
    per_image, smap = _means_for_weights(lambda w: w)
    trimmed = {
        aid: m for aid, m in per_image.items() if smap[aid].label != "SD+PM"
    }
    with pytest.raises(StatsError, match="weight 0"):
        weight_correlation(trimmed, smap, "feasibility")
    with pytest.raises(StatsError, match="no setting"):
        weight_correlation({"mystery": ImageMeans(1, 1, 1), **per_image}, smap, "novelty")


def test_tradeoff_correlation_shapes():
    inc = {f"a{i}": ImageMeans(i, i, 1) for i in range(1, 6)}
    assert tradeoff_correlation(inc).rho == pytest.approx(1.0)
    dec = {f"a{i}": ImageMeans(i, 6 - i, 1) for i in range(1, 6)}
    assert tradeoff_correlation(dec).rho == pytest.approx(-1.0)
    rng = np.random.default_rng(9)
    mixed = {
        f"a{i}": ImageMeans(float(rng.integers(1, 8)), float(rng.integers(1, 8)), 1)
        for i in range(12)
    }
    pairs = [(m.mean_feasibility, m.mean_novelty) for m in mixed.values()]
    assert tradeoff_correlation(mixed).rho == pytest.approx(
        rank_then_pearson(pairs), abs=1e-12
    )


def test_quality_flags():
    sessions = {
        "fast": [500, 400, 600],
        "ok": [5000, 4000, 6000],
        "mixed": [100, 3000, 3500],
    }
    assert quality_flags(sessions, 2000) == ["fast"]
    assert quality_flags(sessions, 0) == []
    assert quality_flags({}, 2000) == []
