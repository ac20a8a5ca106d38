"""End-to-end CLI coverage with the click test runner."""

import json

import pytest
from click.testing import CliRunner

from nerloop.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> run -> exports -> trained checkpoints, shared across tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()

    r = runner.invoke(
        main,
        ["synth", "--out", str(root / "data"), "--paragraphs", "600",
         "--terms", "60", "--extra-terms", "20", "--seed", "11"],
    )
    assert r.exit_code == 0, r.output

    r = runner.invoke(
        main,
        ["run",
         "--corpus", str(root / "data" / "corpus.jsonl"),
         "--lexicon", str(root / "data" / "lexicon.csv"),
         "--annotator", "simulated",
         "--truth", str(root / "data" / "truth.jsonl"),
         "--error-rate", "0.2",
         "--state", str(root / "state.json"),
         "--n0", "12", "--n", "8", "--nt", "24",
         "--max-epochs", "8",
         "--report-dir", str(root / "reports"),
         "--export-gold", str(root / "gold.jsonl"),
         "--export-test", str(root / "test.jsonl")],
    )
    assert r.exit_code == 0, r.output

    for variant, name in (("a", "model_a.ckpt"), ("b", "model_b.ckpt")):
        r = runner.invoke(
            main,
            ["train", "--in", str(root / "gold.jsonl"), "--out", str(root / name),
             "--lexicon", str(root / "data" / "lexicon.csv"),
             "--variant", variant, "--max-epochs", "8"],
        )
        assert r.exit_code == 0, r.output
    return root


def test_run_produces_state_and_reports(workspace):
    state = json.loads((workspace / "state.json").read_text())
    assert state["phase"] == "DONE"
    assert len(state["test"]) == 24
    assert (workspace / "reports" / "f1_history.png").exists()
    assert (workspace / "gold.jsonl").exists()


def test_eval_model(workspace):
    runner = CliRunner()
    r = runner.invoke(
        main, ["eval", "--model", str(workspace / "model_a.ckpt"), "--data", str(workspace / "test.jsonl")]
    )
    assert r.exit_code == 0, r.output
    assert "F1=" in r.output


def test_eval_kfold(workspace):
    runner = CliRunner()
    r = runner.invoke(
        main,
        ["eval", "--kfold", "3", "--data", str(workspace / "test.jsonl"),
         "--lexicon", str(workspace / "data" / "lexicon.csv"), "--max-epochs", "4",
         "--report-dir", str(workspace / "reports")],
    )
    assert r.exit_code == 0, r.output
    assert "average F1" in r.output
    assert (workspace / "reports" / "kfold.csv").exists()


def test_analyze(workspace):
    runner = CliRunner()
    r = runner.invoke(
        main,
        ["analyze", "--model", str(workspace / "model_a.ckpt"),
         "--data", str(workspace / "test.jsonl"), "--window", "3",
         "--report-dir", str(workspace / "reports")],
    )
    assert r.exit_code == 0, r.output
    assert "window size = 3" in r.output


def test_extract_and_compare(workspace):
    runner = CliRunner()
    r = runner.invoke(
        main,
        ["extract", "--corpus", str(workspace / "data" / "corpus.jsonl"),
         "--model-a", str(workspace / "model_a.ckpt"),
         "--model-b", str(workspace / "model_b.ckpt"),
         "--workers", "2", "--out", str(workspace / "entities.csv"),
         "--report-dir", str(workspace / "reports")],
    )
    assert r.exit_code == 0, r.output
    assert (workspace / "reports" / "detection_counts.png").exists()

    r = runner.invoke(
        main,
        ["compare", "--report", str(workspace / "entities.csv"),
         "--ref", str(workspace / "data" / "reference.csv"),
         "--top-k", "10", "--report-dir", str(workspace / "reports")],
    )
    assert r.exit_code == 0, r.output
    assert "exact" in r.output
    assert (workspace / "reports" / "match_rates.png").exists()


def test_export(workspace):
    runner = CliRunner()
    out = workspace / "test_iob.csv"
    r = runner.invoke(main, ["export", "--in", str(workspace / "test.jsonl"), "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert out.read_text(encoding="utf-8").startswith("tokens,labels")


def test_lexicon_load(workspace):
    runner = CliRunner()
    r = runner.invoke(
        main, ["lexicon", "load", "--path", str(workspace / "data" / "lexicon.csv"), "--filter", "has-code"]
    )
    assert r.exit_code == 0, r.output
    assert "terms: 60" in r.output


def test_resume_flag(workspace, tmp_path):
    # A completed state resumes to an identical file (no-op continuation).
    runner = CliRunner()
    state_path = workspace / "state.json"
    before = state_path.read_bytes()
    r = runner.invoke(
        main,
        ["run",
         "--corpus", str(workspace / "data" / "corpus.jsonl"),
         "--lexicon", str(workspace / "data" / "lexicon.csv"),
         "--annotator", "simulated",
         "--truth", str(workspace / "data" / "truth.jsonl"),
         "--state", str(state_path), "--resume",
         "--n0", "12", "--n", "8", "--nt", "24", "--max-epochs", "8"],
    )
    assert r.exit_code == 0, r.output
    assert state_path.read_bytes() == before


def test_config_file_defaults(workspace, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "lexicon:\n  load:\n    path: " + str(workspace / "data" / "lexicon.csv") + "\n",
        encoding="utf-8",
    )
    runner = CliRunner()
    r = runner.invoke(main, ["--config", str(cfg), "lexicon", "load"])
    assert r.exit_code == 0, r.output
    assert "terms: 60" in r.output


def test_simulated_annotator_requires_truth(workspace):
    runner = CliRunner()
    r = runner.invoke(
        main,
        ["run", "--corpus", str(workspace / "data" / "corpus.jsonl"),
         "--lexicon", str(workspace / "data" / "lexicon.csv"),
         "--annotator", "simulated", "--state", str(workspace / "never.json")],
    )
    assert r.exit_code != 0
    assert "--truth" in r.output
