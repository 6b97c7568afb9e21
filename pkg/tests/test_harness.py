import json
import logging
import math
import random
from dataclasses import replace

import pytest

from madrec.agent import TaskKind
from madrec.evaluation import EvalConfig, EvalReport, evaluate, format_table, run_ablation
from madrec.evaluation.harness import config_label, text_tokens
from madrec.llm import MockBackend

USERS = 60


def test_config_label_and_tokens():
    assert config_label(True, True) == "RR + SF"
    assert config_label(False, False) == "No-RR + No-SF"
    assert text_tokens("Great scent, it's LIGHT!") == ["great", "scent", "it", "s", "light"]


def test_cutoffs_above_top_k_dropped(caplog):
    with caplog.at_level(logging.WARNING):
        cfg = EvalConfig(cutoffs=(5, 10, 20), top_k=10)
    assert cfg.cutoffs == (5, 10)
    assert "20" in caplog.text
    with pytest.raises(ValueError):
        EvalConfig(pool_size=5, top_k=10)
    with pytest.raises(ValueError):
        EvalConfig(rerank_top_k=5, top_k=10)


def test_report_means_recompute_and_shuffle(synth_ctx):
    rep = evaluate(synth_ctx, EvalConfig(), MockBackend(), users=synth_ctx.eval_users(USERS))
    assert rep.violations == []
    assert len(rep.rows) == USERS
    for m in rep.metric_names:
        vals = [r[m] for r in rep.rows]
        assert rep.means[m] == pytest.approx(sum(vals) / len(vals), abs=1e-12)
    shuffled = EvalReport(rep.config, random.Random(0).sample(rep.rows, len(rep.rows)))
    assert shuffled.recompute_means() == rep.means
    for n in (5, 10):
        assert rep.means[f"NDCG@{n}"] <= rep.means[f"HR@{n}"]
    assert rep.means["HR@5"] <= rep.means["HR@10"]


def test_error_rows_counted_not_averaged(synth_ctx):
    users = synth_ctx.eval_users(USERS)
    # prompts carry no user id, so fail on the user's profile text
    target = set(users[:2])

    class ByUser(MockBackend):
        def complete(self, prompt, template=None):
            for u in target:
                if synth_ctx.users[u].render() in prompt:
                    raise RuntimeError("boom")
            return super().complete(prompt, template)

    rep = evaluate(synth_ctx, EvalConfig(use_sf=False), ByUser(), users=users)
    errors = [r for r in rep.rows if "error" in r]
    assert {r["user"] for r in errors} >= target
    assert rep.degradations["errors"] == len(errors)
    ok = [r for r in rep.rows if "error" not in r]
    assert rep.means["HR@10"] == pytest.approx(math.fsum(r["HR@10"] for r in ok) / len(ok))
    assert rep.summary_json()["n_users"] == len(ok)


def test_pools_shared_across_configs(synth_ctx):
    users = synth_ctx.eval_users(20)
    first = {u: [c.item_id for c in synth_ctx.pool(u, 100, 0)] for u in users}
    run_ablation(synth_ctx, EvalConfig(), MockBackend(), tasks=[TaskKind.DIRECT], users=users)
    for u in users:
        assert [c.item_id for c in synth_ctx.pool(u, 100, 0)] == first[u]
        gt = synth_ctx.split.targets[u][0]
        assert gt in first[u] and len(first[u]) == 100


def test_ablation_grid_and_no_sf_equivalence(synth_ctx):
    users = synth_ctx.eval_users(USERS)
    reports = run_ablation(synth_ctx, EvalConfig(), MockBackend(), users=users)
    assert sorted(reports) == sorted(
        f"{t}/{lab}" for t in ("direct", "sequential") for lab in ("RR + SF", "RR + No-SF", "No-RR + SF", "No-RR + No-SF")
    )
    for use_rr in (True, False):
        cfg = EvalConfig(use_rr=use_rr, use_sf=True, max_rounds=0)
        zero = evaluate(synth_ctx, cfg, MockBackend(), users=users)
        no_sf = reports[f"direct/{config_label(use_rr, False)}"]
        assert [r["ranked"] for r in zero.rows] == [r["ranked"] for r in no_sf.rows]
        assert zero.means == no_sf.means
    table = format_table(reports)
    assert "Task: direct" in table and "No-RR + No-SF" in table


def test_workers_do_not_change_results(synth_ctx):
    users = synth_ctx.eval_users(USERS)
    one = evaluate(synth_ctx, EvalConfig(workers=1), MockBackend(), users=users)
    many = evaluate(synth_ctx, EvalConfig(workers=6), MockBackend(), users=users)
    assert one.rows == many.rows and one.means == many.means


def test_carry_weights_mode(synth_ctx):
    users = synth_ctx.eval_users(30)
    rep = evaluate(synth_ctx, EvalConfig(carry_weights=True), MockBackend(), users=users)
    assert rep.violations == []
    reset = evaluate(synth_ctx, EvalConfig(), MockBackend(), users=users)
    # the first user always starts from the configured weights
    assert rep.rows[0] == reset.rows[0]


def test_explanation_report(synth_ctx, tmp_path):
    users = synth_ctx.eval_users(20)
    rep = evaluate(synth_ctx, EvalConfig(task=TaskKind.EXPLANATION), MockBackend(), users=users)
    assert rep.metric_names == ["BLEU2", "ROUGE-1", "ROUGE-2", "ROUGE-L", "EmbSim"]
    for r in rep.rows:
        assert 0.0 <= r["BLEU2"] <= 1.0 and 0.0 <= r["ROUGE-L"] <= 1.0
        assert len(r["explanation"].split()) <= 15
    assert "not comparable to BERTScore" in format_table({"e": rep})
    rep.write(tmp_path, "expl")
    summary = json.loads((tmp_path / "expl.json").read_text())
    assert summary["means"] == pytest.approx(rep.means)
    rows = [json.loads(l) for l in (tmp_path / "expl.rows.jsonl").read_text().splitlines()]
    assert len(rows) == 20


def test_rank_rows_consistent(synth_ctx):
    rep = evaluate(synth_ctx, EvalConfig(task=TaskKind.SEQUENTIAL), MockBackend(), users=synth_ctx.eval_users(USERS))
    assert rep.violations == []
    for r in rep.rows:
        assert len(r["ranked"]) == 10
        assert r["NDCG@5"] <= r["HR@5"] <= r["HR@10"]
        assert (r["rank"] is not None and r["rank"] <= 10) == bool(r["HR@10"])
