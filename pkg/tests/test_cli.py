import json
import pytest

from madrec.cli import main
from madrec.config import ConfigError, RunConfig

from conftest import CONFIG_TEXT, tree_bytes


def test_dry_run_prints_plan(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(CONFIG_TEXT)
    assert main(["evaluate", "--config", str(cfg), "--dry-run", "--alpha", "0.5", "--beta", "0.3", "--gamma", "0.2"]) == 0
    out = capsys.readouterr().out
    assert "command: evaluate" in out
    assert "missing (produced by ingest)" in out and "missing (produced by build-profiles)" in out
    assert "alpha: 0.5" in out
    assert not (tmp_path / "work").exists()


@pytest.mark.parametrize(
    "cmd,producer",
    [
        (["ingest"], "synth"),
        (["extract-aspects"], "ingest"),
        (["build-profiles"], "ingest"),
        (["recommend", "--user", "U0001"], "ingest"),
        (["evaluate"], "ingest"),
        (["ablate"], "ingest"),
    ],
)
def test_missing_artifact_names_producer(tmp_path, capsys, cmd, producer):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(CONFIG_TEXT)
    assert main(cmd + ["--config", str(cfg), "--mock"]) == 2
    assert f"run `madrec {producer}` first" in capsys.readouterr().err


def test_missing_store_names_build_profiles(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(CONFIG_TEXT)
    for cmd in ("synth", "ingest", "extract-aspects"):
        assert main([cmd, "--config", str(cfg), "--mock"]) == 0
    assert main(["evaluate", "--config", str(cfg), "--mock"]) == 2
    assert "run `madrec build-profiles` first" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(CONFIG_TEXT + "  top_k: 10\n")
    loaded = RunConfig.load(cfg, {"eval": {"top_k": 5, "workers": 2}, "seed": 9})
    assert loaded["eval"]["top_k"] == 5 and loaded["eval"]["workers"] == 2 and loaded.seed == 9
    assert loaded.work_dir == (tmp_path / "work").resolve()
    with pytest.raises(ConfigError):
        RunConfig.load(cfg, {"eval": {"bogus": 1}})


def test_invalid_weights(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(CONFIG_TEXT)
    bad = ["ingest", "--config", str(cfg), "--dry-run", "--alpha", "0.5", "--beta", "0.3", "--gamma", "0.3"]
    assert main(bad) == 2
    assert "invalid weights" in capsys.readouterr().err
    assert main(bad + ["--normalize-weights"]) == 0
    assert "0.4545" in capsys.readouterr().out


def test_api_key_not_a_flag(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["evaluate", "--api-key", "sk-x"])
    assert "unrecognized arguments" in capsys.readouterr().err


def test_recommend_twice_identical(pipeline_config, capsys):
    args = ["recommend", "--config", str(pipeline_config), "--mock", "--user", "U0003", "--task", "direct"]
    assert main(args) == 0
    first = capsys.readouterr().out
    out_file = pipeline_config.parent / "work" / "recommend" / "U0003-direct.json"
    first_file = out_file.read_bytes()
    assert main(args) == 0
    assert capsys.readouterr().out == first
    assert out_file.read_bytes() == first_file
    rec = json.loads(first_file)
    assert len(rec["ranked"]) == 10 and rec["rounds"] == 0


def test_explain_writes_explanations(pipeline_config):
    assert main(["explain", "--config", str(pipeline_config), "--mock", "--user", "U0004"]) == 0
    rec = json.loads((pipeline_config.parent / "work" / "recommend" / "U0004-explanation.json").read_text())
    assert set(rec["explanations"]) == set(rec["ranked"])
    assert all(len(s.split()) <= 15 for s in rec["explanations"].values())


def result_rows(path):
    """Per-user rows as JSON text, minus the label that echoes the configuration."""
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    return [json.dumps({k: v for k, v in r.items() if k != "config"}, sort_keys=True) for r in rows]


def test_evaluate_zero_rounds_equals_no_sf(pipeline_config):
    base = ["evaluate", "--config", str(pipeline_config), "--mock", "--max-users", "60", "--task", "direct"]
    out = pipeline_config.parent / "work" / "eval"
    assert main(base + ["--use-sf", "false"]) == 0
    no_sf = json.loads((out / "direct-RR_No-SF.json").read_text())
    no_sf_rows = result_rows(out / "direct-RR_No-SF.rows.jsonl")
    assert main(base + ["--use-sf", "true", "--max-rounds", "0"]) == 0
    zero = json.loads((out / "direct-RR_SF.json").read_text())
    assert zero["means"] == no_sf["means"]
    assert zero["degradations"] == no_sf["degradations"]
    assert result_rows(out / "direct-RR_SF.rows.jsonl") == no_sf_rows


def test_rebuild_profiles_idempotent(pipeline_config):
    store = pipeline_config.parent / "work" / "store"
    before = tree_bytes(store, skip=("log.jsonl",))
    assert main(["build-profiles", "--config", str(pipeline_config), "--mock"]) == 0
    assert tree_bytes(store, skip=("log.jsonl",)) == before


def test_two_fresh_runs_byte_identical(twin_runs):
    a, b = (tree_bytes(r) for r in twin_runs)
    assert sorted(a) == sorted(b)
    assert any(k.startswith("work/ablation/") for k in a)
    diff = [k for k in a if a[k] != b[k]]
    assert diff == []


def test_seed_changes_synthetic_corpus(tmp_path):
    for seed in ("0", "1"):
        cfg = tmp_path / seed / "run.yaml"
        cfg.parent.mkdir()
        cfg.write_text(CONFIG_TEXT)
        assert main(["synth", "--config", str(cfg), "--seed", seed]) == 0
    assert (tmp_path / "0" / "data" / "reviews.jsonl").read_bytes() != (tmp_path / "1" / "data" / "reviews.jsonl").read_bytes()
