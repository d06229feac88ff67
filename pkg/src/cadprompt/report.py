"""Campaign report: per-setting rating summaries, pairwise tests, and a
static chart, bundled into one HTML page.

The per-setting summary and chart show mean per-image ratings with standard
error bars; the pairwise table runs the Mann-Whitney comparison for the
canonical pairs (base vs everything, enhancer-only vs every CAD weight, and
adjacent CAD weights).
"""

from __future__ import annotations

import html
import io
import math
from pathlib import Path

import numpy as np

from .analytics import canonical_label_order
from .errors import StatsError
from .genplan import SettingSpec, SettingVariant
from .ratings import RatingRecord
from .stats import ImageMeans, mann_whitney, mean_ratings, tradeoff_correlation, weight_correlation


def canonical_pairs(labels: list[str]) -> list[tuple[str, str]]:
    """Comparison pairs in report order: base vs all, enhancer-only vs CAD
    weights, then adjacent CAD weights."""
    ordered = canonical_label_order(labels)
    cips = [l for l in ordered if l.startswith("CIP(")]
    pairs: list[tuple[str, str]] = []
    if "SD" in ordered and "SD+PM" in ordered:
        pairs.append(("SD", "SD+PM"))
    for cip in cips:
        if "SD" in ordered:
            pairs.append(("SD", cip))
    for cip in cips:
        if "SD+PM" in ordered:
            pairs.append(("SD+PM", cip))
    pairs.extend(zip(cips, cips[1:]))
    return pairs


def _group_means(
    per_image: dict[str, ImageMeans], label_of: dict[str, str]
) -> dict[str, list[ImageMeans]]:
    groups: dict[str, list[ImageMeans]] = {}
    for artifact_id, means in per_image.items():
        label = label_of.get(artifact_id)
        if label is None:
            raise StatsError(f"no setting known for artifact {artifact_id!r}")
        groups.setdefault(label, []).append(means)
    return groups


def _summary_rows(groups: dict[str, list[ImageMeans]]) -> list[dict]:
    rows = []
    for label in canonical_label_order(groups):
        f = np.array([m.mean_feasibility for m in groups[label]])
        n = np.array([m.mean_novelty for m in groups[label]])
        count = len(groups[label])
        sem = 1.0 / math.sqrt(count) if count > 1 else 0.0
        rows.append(
            {
                "setting": label,
                "n_images": count,
                "mean_feasibility": float(f.mean()),
                "sem_feasibility": float(f.std(ddof=1)) * sem if count > 1 else 0.0,
                "mean_novelty": float(n.mean()),
                "sem_novelty": float(n.std(ddof=1)) * sem if count > 1 else 0.0,
            }
        )
    return rows


def _pair_rows(groups: dict[str, list[ImageMeans]]) -> list[dict]:
    rows = []
    for a, b in canonical_pairs(list(groups)):
        fa = [m.mean_feasibility for m in groups[a]]
        fb = [m.mean_feasibility for m in groups[b]]
        na = [m.mean_novelty for m in groups[a]]
        nb = [m.mean_novelty for m in groups[b]]
        rf = mann_whitney(fa, fb)
        rn = mann_whitney(na, nb)
        rows.append(
            {
                "settings": f"{a} : {b}",
                "z_feasibility": rf.z,
                "p_feasibility": rf.p_two_tailed,
                "z_novelty": rn.z,
                "p_novelty": rn.p_two_tailed,
                "method": rf.method,
            }
        )
    return rows


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    out = io.StringIO()
    headers = list(rows[0])
    out.write(",".join(headers) + "\r\n")
    for row in rows:
        out.write(
            ",".join(
                format(v, ".6g") if isinstance(v, float) else str(v)
                for v in (row[h] for h in headers)
            )
            + "\r\n"
        )
    return out.getvalue()


def _chart(rows: list[dict], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [r["setting"] for r in rows]
    x = np.arange(len(labels))
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for ax, dim, title in [
        (axes[0], "feasibility", "Perceived feasibility"),
        (axes[1], "novelty", "Perceived novelty"),
    ]:
        means = [r[f"mean_{dim}"] for r in rows]
        sems = [r[f"sem_{dim}"] for r in rows]
        ax.bar(x, means, yerr=sems, capsize=4, color="#4878a8")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylim(1, 7)
        ax.set_title(title)
        ax.set_ylabel("mean per-image rating (1-7)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _html_table(rows: list[dict]) -> str:
    if not rows:
        return "<p>(no data)</p>"
    headers = list(rows[0])
    cells = "".join(f"<th>{html.escape(h)}</th>" for h in headers)
    body = ""
    for row in rows:
        body += (
            "<tr>"
            + "".join(
                f"<td>{format(row[h], '.4g') if isinstance(row[h], float) else html.escape(str(row[h]))}</td>"
                for h in headers
            )
            + "</tr>"
        )
    return f"<table><thead><tr>{cells}</tr></thead><tbody>{body}</tbody></table>"


def build_report(
    records: list[RatingRecord],
    setting_map: dict[str, SettingSpec],
    out_path: str | Path,
) -> dict[str, Path]:
    """Write the report HTML plus its CSV and chart side files.

    Returns the paths written, keyed by kind.
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    stem = out_path.with_suffix("")
    per_image = mean_ratings(records)
    label_of = {aid: spec.label for aid, spec in setting_map.items()}
    groups = _group_means(per_image, label_of)
    summary = _summary_rows(groups)
    pairs = _pair_rows(groups)

    correlations = []
    try:
        for dim in ("feasibility", "novelty"):
            result = weight_correlation(per_image, setting_map, dim)
            correlations.append(
                {"analysis": f"weight vs {dim}", "rho": result.rho,
                 "p_two_tailed": result.p_two_tailed, "n": result.n}
            )
        result = tradeoff_correlation(per_image)
        correlations.append(
            {"analysis": "feasibility vs novelty", "rho": result.rho,
             "p_two_tailed": result.p_two_tailed, "n": result.n}
        )
    except StatsError:
        # Correlations need weight-0 and CAD-weight groups; partial campaigns
        # still get the summary and pair tables.
        correlations = []

    paths = {
        "means_csv": stem.parent / (stem.name + "_means.csv"),
        "pairs_csv": stem.parent / (stem.name + "_pairs.csv"),
        "chart": stem.parent / (stem.name + "_chart.png"),
        "html": out_path,
    }
    paths["means_csv"].write_text(_csv(summary))
    paths["pairs_csv"].write_text(_csv(pairs))
    _chart(summary, paths["chart"])

    total = len(records)
    doc = f"""<!doctype html>
<html><head><meta charset="utf-8"><title>Rating campaign report</title>
<style>
body {{ font-family: sans-serif; margin: 2em; max-width: 70em; }}
table {{ border-collapse: collapse; margin: 1em 0; }}
td, th {{ border: 1px solid #999; padding: 0.3em 0.7em; text-align: right; }}
th {{ background: #eee; }}
td:first-child, th:first-child {{ text-align: left; }}
</style></head><body>
<h1>Rating campaign report</h1>
<p>{total} ratings over {len(per_image)} images in {len(groups)} settings.</p>
<h2>Ratings by setting</h2>
<img src="{paths['chart'].name}" alt="mean ratings per setting" width="880">
{_html_table(summary)}
<h2>Pairwise setting comparisons (Mann-Whitney, two-tailed)</h2>
{_html_table(pairs)}
<h2>Rank correlations</h2>
{_html_table(correlations) if correlations else "<p>(not computable for this campaign)</p>"}
<p>Method notes: tests run on per-image mean ratings; tie-corrected normal
approximation without continuity correction unless the exact method is
reported; the enhancer-only setting serves as weight 0 in the weight
correlations.</p>
</body></html>
"""
    out_path.write_text(doc)
    return paths
