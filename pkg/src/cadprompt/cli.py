"""Command-line entry point.

One binary, subcommand style, all paths explicit. Exit codes: 0 on success,
1 on usage errors, 2 on data errors; ``--format json`` switches commands
with output to a machine-readable form.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .analytics import mean_similarity_matrix, prompt_similarity_matrix
from .assignment import build_assignment, save_assignment
from .corpus import ingest_corpus, load_corpus, save_corpus
from .embedding import HttpEmbedder, MockEmbedder
from .errors import WorkbenchError
from .generation import HttpBackend, MockBackend, execute_plan, load_artifact_index
from .genplan import (
    build_plan,
    default_settings_grid,
    load_plan,
    load_prompts,
    parse_cell_key,
    save_plan,
)
from .ratings import elapsed_by_rater, load_ratings
from .report import build_report
from .retrieval import top_k
from .service import load_config, serve
from .stats import mean_ratings, mann_whitney, quality_flags, tradeoff_correlation, weight_correlation


@click.group()
@click.version_option(version=__version__, prog_name="cadprompt")
def cli():
    """CAD-image prompting workbench."""


def _emit(doc, fmt: str, render_table) -> None:
    if fmt == "json":
        click.echo(json.dumps(doc, indent=1))
    else:
        render_table(doc)


def _make_embedder(spec: str, dim: int, seed: int):
    if spec == "mock":
        return MockEmbedder(dim=dim, seed=seed)
    return HttpEmbedder(spec)


@cli.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--embedder", default="mock", show_default=True,
              help="'mock' or the base URL of an embedding service.")
@click.option("--dim", default=512, show_default=True, help="Mock embedder dimension.")
@click.option("--embedder-seed", default=0, show_default=True)
def ingest(manifest, out, embedder, dim, embedder_seed):
    """Embed the images listed in MANIFEST into a corpus store."""
    store = ingest_corpus(manifest, _make_embedder(embedder, dim, embedder_seed))
    save_corpus(store, out)
    click.echo(f"ingested {len(store)} images (dim {store.dim}) -> {out}")


@cli.command()
@click.option("--corpus", "corpus_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt", required=True)
@click.option("--k", default=1, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def retrieve(corpus_file, prompt, k, fmt):
    """Rank the corpus images most semantically similar to PROMPT."""
    store = load_corpus(corpus_file)
    embedder = MockEmbedder.from_id(store.embedder_id)
    hits = top_k(store, prompt, k, embedder=embedder)
    doc = [
        {"rank": h.rank, "image_id": h.entry.image_id, "score": h.score, "uri": h.entry.uri}
        for h in hits
    ]

    def table(doc):
        click.echo(f"{'rank':>4}  {'score':>9}  image_id")
        for row in doc:
            click.echo(f"{row['rank']:>4}  {row['score']:>9.6f}  {row['image_id']}")

    _emit(doc, fmt, table)


@cli.command()
@click.option("--prompts", "prompts_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", default="default7", show_default=True,
              type=click.Choice(["default7"]))
@click.option("--seed", default=0, show_default=True, help="Master seed for all cells.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def plan(prompts_file, corpus_file, grid, seed, out):
    """Expand prompts across the settings grid into a generation plan."""
    prompts = load_prompts(prompts_file)
    store = load_corpus(corpus_file)
    embedder = MockEmbedder.from_id(store.embedder_id)
    settings = default_settings_grid()
    built = build_plan(prompts, settings, store, embedder, seed)
    save_plan(built, out)
    click.echo(
        f"planned {built.n_cells} artifacts "
        f"({len(prompts)} prompts x {len(settings)} settings) -> {out}"
    )


@cli.command()
@click.option("--plan", "plan_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", default="mock", show_default=True,
              help="'mock' or the base URL of a generation service.")
@click.option("--parallelism", default=1, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--embedder-url", default=None,
              help="Embedding service for artifact embeddings (defaults to the plan's mock embedder).")
@click.option("--noise-scale", default=0.05, show_default=True,
              help="Mock backend perturbation magnitude.")
def generate(plan_file, backend, parallelism, out_dir, embedder_url, noise_scale):
    """Execute a plan against a backend; resumes if partially complete."""
    gplan = load_plan(plan_file)
    if embedder_url:
        embedder = HttpEmbedder(embedder_url)
    elif gplan.embedder_id and gplan.embedder_id.startswith("mock-"):
        embedder = MockEmbedder.from_id(gplan.embedder_id)
    else:
        raise WorkbenchError(
            "plan was not built with a mock embedder; pass --embedder-url"
        )
    if backend == "mock":
        backend_impl = MockBackend(embedder, noise_scale=noise_scale)
    else:
        backend_impl = HttpBackend(backend)
    report = execute_plan(
        gplan, backend_impl, embedder, parallelism=parallelism, out_dir=out_dir
    )
    click.echo(
        f"completed {len(report.artifacts)}/{gplan.n_cells} cells "
        f"({report.newly_generated} new, {len(report.failures)} failed) -> {out_dir}"
    )
    for failure in report.failures:
        click.echo(f"  failed {failure.artifact_id}: {failure.reason}", err=True)
    if report.failures:
        sys.exit(2)


@cli.command()
@click.option("--artifacts", "artifacts_dir", required=True, type=click.Path(exists=True))
@click.option("--prompt-id", default=None, help="Prompt to analyze.")
@click.option("--aggregate", is_flag=True,
              help="Average the per-prompt matrices element-wise (convenience summary).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def simmatrix(artifacts_dir, prompt_id, aggregate, fmt):
    """Setting-by-setting mean pairwise similarity matrix for one prompt."""
    artifacts = load_artifact_index(artifacts_dir)
    if not aggregate:
        if prompt_id is None:
            raise click.UsageError("--prompt-id is required unless --aggregate is set")
        matrix = prompt_similarity_matrix(artifacts, prompt_id)
    else:
        prompt_ids = sorted({a.prompt_id for a in artifacts})
        matrix = mean_similarity_matrix(
            [prompt_similarity_matrix(artifacts, pid) for pid in prompt_ids]
        )
        click.echo("# element-wise mean across prompts (summary, not per-prompt data)", err=True)
    if fmt == "json":
        click.echo(json.dumps(matrix.to_dict(), indent=1))
    else:
        click.echo(matrix.to_csv(), nl=False)


@cli.command()
@click.option("--images", required=True, type=int)
@click.option("--raters", required=True, type=int)
@click.option("--per-rater", "per_rater", required=True, type=int)
@click.option("--per-image", "per_image", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--artifacts", "artifacts_dir", default=None, type=click.Path(exists=True),
              help="Use real artifact ids from this run directory.")
def assign(images, raters, per_rater, per_image, seed, out, artifacts_dir):
    """Build a balanced rater assignment plan."""
    image_ids = None
    if artifacts_dir:
        image_ids = [a.artifact_id for a in load_artifact_index(artifacts_dir)]
        if len(image_ids) != images:
            raise WorkbenchError(
                f"--images {images} does not match the {len(image_ids)} artifacts on disk"
            )
    plan = build_assignment(images, raters, per_rater, per_image, seed, image_ids=image_ids)
    save_assignment(plan, out)
    click.echo(
        f"assigned {images} images x {per_image} raters "
        f"({raters} raters x {per_rater} images) -> {out}"
    )


def _settings_by_label(plan_file):
    settings = (
        load_plan(plan_file).settings if plan_file else default_settings_grid()
    )
    return {s.label: s for s in settings}


def _label_of_artifact(artifact_id: str) -> str:
    return parse_cell_key(artifact_id)[1]


@cli.group()
def stats():
    """Statistical analyses over collected ratings."""


@stats.command("pair")
@click.option("--ratings", "ratings_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--a", "label_a", required=True, help="First setting label, e.g. SD.")
@click.option("--b", "label_b", required=True, help='Second setting label, e.g. "CIP(0.35)".')
@click.option("--dimension", type=click.Choice(["feasibility", "novelty"]), required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def stats_pair(ratings_file, label_a, label_b, dimension, fmt):
    """Mann-Whitney test between two settings on per-image mean ratings."""
    records = load_ratings(ratings_file)
    per_image = mean_ratings(records)
    groups: dict[str, list[float]] = {}
    for artifact_id, means in per_image.items():
        value = means.mean_feasibility if dimension == "feasibility" else means.mean_novelty
        groups.setdefault(_label_of_artifact(artifact_id), []).append(value)
    for label in (label_a, label_b):
        if label not in groups:
            raise WorkbenchError(
                f"no rated artifacts for setting {label!r}; "
                f"known settings: {sorted(groups)}"
            )
    result = mann_whitney(groups[label_a], groups[label_b])
    doc = {"a": label_a, "b": label_b, "dimension": dimension, **result.to_dict()}

    def table(doc):
        click.echo(
            f"{label_a} : {label_b}  ({dimension}, per-image means, "
            f"n={result.n_a}/{result.n_b})"
        )
        click.echo(
            f"  U = {result.u:g}   Z = {result.z:.4g}   "
            f"p = {result.p_two_tailed:.4g}  [{result.method}]"
        )

    _emit(doc, fmt, table)


@stats.command("weight-corr")
@click.option("--ratings", "ratings_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dimension", type=click.Choice(["feasibility", "novelty"]), required=True)
@click.option("--plan", "plan_file", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Plan file defining the settings (defaults to the canonical grid).")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def stats_weight_corr(ratings_file, dimension, plan_file, fmt):
    """Spearman correlation between CAD-prompt weight and mean rating."""
    records = load_ratings(ratings_file)
    per_image = mean_ratings(records)
    by_label = _settings_by_label(plan_file)
    setting_map = {}
    for artifact_id in per_image:
        label = _label_of_artifact(artifact_id)
        if label not in by_label:
            raise WorkbenchError(
                f"artifact {artifact_id!r} has unknown setting {label!r}; pass --plan"
            )
        setting_map[artifact_id] = by_label[label]
    result = weight_correlation(per_image, setting_map, dimension)
    doc = {"dimension": dimension, **result.to_dict()}
    _emit(doc, fmt, lambda d: click.echo(
        f"weight vs {dimension}: rho = {result.rho:.4g}  "
        f"p = {result.p_two_tailed:.4g}  (n = {result.n})"
    ))


@stats.command("tradeoff")
@click.option("--ratings", "ratings_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def stats_tradeoff(ratings_file, fmt):
    """Spearman correlation between mean feasibility and mean novelty."""
    records = load_ratings(ratings_file)
    result = tradeoff_correlation(mean_ratings(records))
    doc = {"analysis": "feasibility vs novelty", **result.to_dict()}
    _emit(doc, fmt, lambda d: click.echo(
        f"feasibility vs novelty: rho = {result.rho:.4g}  "
        f"p = {result.p_two_tailed:.4g}  (n = {result.n})"
    ))


@stats.command("flags")
@click.option("--ratings", "ratings_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--min-ms", default=2000, show_default=True,
              help="Median milliseconds per image under which a rater is flagged.")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def stats_flags(ratings_file, min_ms, fmt):
    """Flag raters who answered implausibly fast (flag-only, never deletes)."""
    records = load_ratings(ratings_file)
    flagged = quality_flags(elapsed_by_rater(records), min_ms)
    doc = {"min_ms_per_image": min_ms, "flagged": flagged}
    _emit(doc, fmt, lambda d: click.echo(
        "flagged raters: " + (", ".join(flagged) if flagged else "(none)")
    ))


@cli.command()
@click.option("--ratings", "ratings_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--plan", "plan_file", default=None, type=click.Path(exists=True, dir_okay=False))
def report(ratings_file, out, plan_file):
    """Write the campaign report (HTML + CSV tables + chart)."""
    records = load_ratings(ratings_file)
    by_label = _settings_by_label(plan_file)
    setting_map = {}
    for record in records:
        label = _label_of_artifact(record.artifact_id)
        if label not in by_label:
            raise WorkbenchError(
                f"artifact {record.artifact_id!r} has unknown setting {label!r}; pass --plan"
            )
        setting_map[record.artifact_id] = by_label[label]
    paths = build_report(records, setting_map, out)
    for kind, path in paths.items():
        click.echo(f"{kind}: {path}")


@cli.command("serve")
@click.option("--config", "config_file", required=True, type=click.Path(exists=True, dir_okay=False))
def serve_cmd(config_file):
    """Start the survey/designer HTTP service."""
    serve(load_config(config_file))


@cli.command("mock-corpus")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--count", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--size", default=48, show_default=True, help="Image side length in pixels.")
def mock_corpus(out_dir, count, seed, size):
    """Generate a synthetic CAD-image corpus (random PNGs plus manifest)."""
    import numpy as np
    from PIL import Image

    out = Path(out_dir)
    images_dir = out / "cad"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(count):
        pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        name = f"cad-{i:04d}.png"
        Image.fromarray(pixels, mode="RGB").save(images_dir / name)
        entries.append(
            {"image_id": f"cad-{i:04d}", "uri": f"cad/{name}",
             "metadata": {"source": "synthetic"}}
        )
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"images": entries}, indent=1))
    click.echo(f"wrote {count} synthetic CAD images and {manifest}")


def main(argv=None) -> int:
    """Dispatch *argv*, mapping errors to the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except WorkbenchError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 0
        return code


if __name__ == "__main__":
    sys.exit(main())
