import json
import random
from pathlib import Path

import pytest

from cadprompt.cli import main

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def simulate_campaign(assignment_path, ratings_path, seed=0):
    """Drive a full campaign through the coordinator, with ratings that rise
    with the CAD weight so the stats commands have signal."""
    from cadprompt.assignment import load_assignment
    from cadprompt.genplan import parse_cell_key
    from cadprompt.ratings import RatingStore
    from cadprompt.service import SurveyCoordinator

    weights = {"SD": None, "SD+PM": 0.0, "CIP(0.35)": 0.35, "CIP(0.51)": 0.51,
               "CIP(0.67)": 0.67, "CIP(0.83)": 0.83, "CIP(1)": 1.0}
    rng = random.Random(seed)
    assignment = load_assignment(assignment_path)
    coordinator = SurveyCoordinator(assignment, RatingStore(ratings_path))
    while True:
        pending = False
        for rater in assignment.per_rater:
            item = coordinator.get_next(rater)
            if item.artifact_id is None:
                continue
            pending = True
            weight = weights[parse_cell_key(item.artifact_id)[1]]
            base = 2.0 if weight is None else 3.0 + 3.0 * weight
            feasibility = max(1, min(7, round(base + rng.uniform(-1, 1))))
            novelty = max(1, min(7, round(6.5 - (weight or 0.0) * 3 + rng.uniform(-1, 1))))
            coordinator.submit_rating(
                rater, item.artifact_id, feasibility, novelty, rng.randint(1200, 8000)
            )
        if not pending:
            break


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


def test_full_pipeline_deterministic(workdir, capsys):
    """ingest -> plan -> generate -> simmatrix -> assign -> stats, twice,
    with identical outputs under a fixed seed."""
    prompts = workdir / "prompts.json"
    prompts.write_text(json.dumps([
        {"prompt_id": "p1", "text": "a road bike"},
        {"prompt_id": "p2", "text": "a cargo trike"},
        {"prompt_id": "p3", "text": "a folding commuter"},
    ]))
    code, _, _ = run(capsys, "mock-corpus", "--out-dir", str(workdir / "corpus"),
                     "--count", "10", "--seed", "1")
    assert code == 0

    def build(tag):
        base = workdir / tag
        base.mkdir(exist_ok=True)
        corpus = base / "corpus.json"
        planfile = base / "plan.json"
        rundir = base / "run"
        assert run(capsys, "ingest", "--manifest", str(workdir / "corpus/manifest.json"),
                   "--out", str(corpus), "--dim", "32", "--embedder-seed", "2")[0] == 0
        assert run(capsys, "plan", "--prompts", str(prompts), "--corpus", str(corpus),
                   "--grid", "default7", "--seed", "9", "--out", str(planfile))[0] == 0
        assert run(capsys, "generate", "--plan", str(planfile), "--backend", "mock",
                   "--parallelism", "4", "--out-dir", str(rundir))[0] == 0
        return corpus, planfile, rundir

    corpus1, plan1, run1 = build("a")
    corpus2, plan2, run2 = build("b")
    assert corpus1.read_bytes() == corpus2.read_bytes()
    assert plan1.read_bytes() == plan2.read_bytes()
    assert (run1 / "artifacts.jsonl").read_bytes() == (run2 / "artifacts.jsonl").read_bytes()
    images1 = sorted(p.name for p in (run1 / "images").iterdir())
    images2 = sorted(p.name for p in (run2 / "images").iterdir())
    assert images1 == images2 == sorted(images1)
    for name in images1:
        assert (run1 / "images" / name).read_bytes() == (run2 / "images" / name).read_bytes()

    code, out, _ = run(capsys, "simmatrix", "--artifacts", str(run1),
                       "--prompt-id", "p1", "--format", "csv")
    assert code == 0
    header = out.splitlines()[0]
    assert header == ",SD,SD+PM,CIP(0.35),CIP(0.51),CIP(0.67),CIP(0.83),CIP(1)"

    code, out2, _ = run(capsys, "simmatrix", "--artifacts", str(run2),
                        "--prompt-id", "p1", "--format", "csv")
    assert out2 == out

    # 84 artifacts, 6 raters x 28 each, every artifact rated twice
    assignment = workdir / "assignment.json"
    code, _, _ = run(capsys, "assign", "--images", "84", "--raters", "6",
                     "--per-rater", "28", "--per-image", "2", "--seed", "4",
                     "--out", str(assignment), "--artifacts", str(run1))
    assert code == 0

    ratings = workdir / "ratings.jsonl"
    simulate_campaign(assignment, ratings, seed=5)

    code, out, _ = run(capsys, "stats", "pair", "--ratings", str(ratings),
                       "--a", "SD", "--b", "CIP(0.35)", "--dimension", "feasibility",
                       "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["n_a"] == doc["n_b"] == 12
    assert doc["z"] < 0  # SD rated below CIP(0.35) by construction

    code, out, _ = run(capsys, "stats", "weight-corr", "--ratings", str(ratings),
                       "--dimension", "novelty", "--format", "json")
    assert code == 0
    assert json.loads(out)["rho"] < 0

    code, out, _ = run(capsys, "stats", "tradeoff", "--ratings", str(ratings),
                       "--format", "json")
    assert code == 0
    assert -1.0 <= json.loads(out)["rho"] <= 1.0

    code, out, _ = run(capsys, "stats", "flags", "--ratings", str(ratings),
                       "--min-ms", "1000", "--format", "json")
    assert code == 0
    assert json.loads(out)["flagged"] == []

    report_path = workdir / "report.html"
    code, _, _ = run(capsys, "report", "--ratings", str(ratings), "--out", str(report_path))
    assert code == 0
    assert report_path.exists()
    assert (workdir / "report_means.csv").exists()
    assert (workdir / "report_pairs.csv").exists()
    assert (workdir / "report_chart.png").read_bytes().startswith(b"\x89PNG")
    html = report_path.read_text()
    assert "SD+PM" in html and "CIP(0.35)" in html


def test_two_setting_simmatrix(tmp_path, capsys, embedder):
    """A handmade 2-setting artifact index yields a 2x2 symmetric CSV."""
    import numpy as np

    from cadprompt.generation import GeneratedArtifact, write_artifact_index

    rng = np.random.default_rng(0)

    def vec():
        v = rng.standard_normal(8)
        return v / np.linalg.norm(v)

    artifacts = [
        GeneratedArtifact(
            artifact_id=f"p1:{label}:{i}", prompt_id="p1", setting_label=label,
            replicate=i, seed=i, uri=f"images/x{i}.png", embedding=vec(),
        )
        for label in ("SD", "SD+PM")
        for i in (1, 2)
    ]
    write_artifact_index(artifacts, tmp_path)
    code, out, _ = run(capsys, "simmatrix", "--artifacts", str(tmp_path),
                       "--prompt-id", "p1", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["labels"] == ["SD", "SD+PM"]
    values = doc["values"]
    assert len(values) == 2 and len(values[0]) == 2
    assert values[0][1] == values[1][0]

    code, out, _ = run(capsys, "simmatrix", "--artifacts", str(tmp_path),
                       "--prompt-id", "p1", "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == ",SD,SD+PM"
    assert len(lines) == 3


def test_exit_codes(tmp_path, capsys):
    # usage errors -> 1
    code, _, err = run(capsys, "no-such-command")
    assert code == 1
    code, _, _ = run(capsys, "retrieve", "--corpus")
    assert code == 1
    # data errors -> 2
    code, _, err = run(capsys, "assign", "--images", "10", "--raters", "3",
                       "--per-rater", "4", "--per-image", "2",
                       "--out", str(tmp_path / "x.json"))
    assert code == 2
    assert "10 * 2" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "retrieve", "--corpus", str(bad), "--prompt", "x")
    assert code == 2


def test_shipped_prompts_plan_cardinality(tmp_path, capsys):
    """The bundled 15-prompt file against the default grid plans 420 cells."""
    code, _, _ = run(capsys, "mock-corpus", "--out-dir", str(tmp_path / "c"),
                     "--count", "6", "--seed", "0")
    assert code == 0
    corpus = tmp_path / "corpus.json"
    assert run(capsys, "ingest", "--manifest", str(tmp_path / "c/manifest.json"),
               "--out", str(corpus), "--dim", "16")[0] == 0
    code, out, _ = run(capsys, "plan", "--prompts", str(DATA_DIR / "prompts.json"),
                       "--corpus", str(corpus), "--seed", "1",
                       "--out", str(tmp_path / "plan.json"))
    assert code == 0
    assert "planned 420 artifacts" in out


def test_resume_after_partial_failure(tmp_path, capsys, monkeypatch):
    """generate exits 2 on partial failure and completes on re-run."""
    import cadprompt.cli as cli_module
    from cadprompt.generation import MockBackend

    (tmp_path / "c").mkdir()
    assert run(capsys, "mock-corpus", "--out-dir", str(tmp_path / "c"),
               "--count", "4", "--seed", "3")[0] == 0
    corpus = tmp_path / "corpus.json"
    assert run(capsys, "ingest", "--manifest", str(tmp_path / "c/manifest.json"),
               "--out", str(corpus), "--dim", "16")[0] == 0
    prompts = tmp_path / "prompts.json"
    prompts.write_text(json.dumps([{"prompt_id": "p1", "text": "a bike"}]))
    planfile = tmp_path / "plan.json"
    assert run(capsys, "plan", "--prompts", str(prompts), "--corpus", str(corpus),
               "--seed", "2", "--out", str(planfile))[0] == 0

    calls = {"n": 0}
    original_generate = MockBackend.generate

    def flaky(self, text, cad_image=None, weight=None, params=None, seed=0):
        calls["n"] += 1
        if calls["n"] == 5:
            raise TimeoutError("injected failure")
        return original_generate(self, text, cad_image, weight, params, seed)

    monkeypatch.setattr(MockBackend, "generate", flaky)
    code, out, err = run(capsys, "generate", "--plan", str(planfile),
                         "--backend", "mock", "--out-dir", str(tmp_path / "run"))
    assert code == 2
    assert "1 failed" in out
    monkeypatch.setattr(MockBackend, "generate", original_generate)
    code, out, _ = run(capsys, "generate", "--plan", str(planfile),
                       "--backend", "mock", "--out-dir", str(tmp_path / "run"))
    assert code == 0
    assert "(1 new, 0 failed)" in out
