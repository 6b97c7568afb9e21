"""Leave-one-out evaluation and the re-ranking / self-feedback ablation grid."""
from __future__ import annotations

import json
import logging
import math
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from ..agent import Agent, Candidate, TaskKind
from ..corpus import LooSplit, PopularityIndex, popularity, sample_candidates
from ..memory import MemoryStore
from ..profiles import Profile
from ..rerank import RerankWeights
from ..textvec import WordVectors, cosine, embed_text
from .metrics import bleu2, hit_at, ndcg_at, rank_of, rouge_l, rouge_n

logger = logging.getLogger(__name__)

ABLATION_GRID = ((True, True), (True, False), (False, True), (False, False))
TEXT_METRICS = ("BLEU2", "ROUGE-1", "ROUGE-2", "ROUGE-L", "EmbSim")


def text_tokens(text: str) -> list[str]:
    """Lowercased word tokens with stopwords kept, for n-gram overlap."""
    return re.findall(r"[^\W_]+", text.lower())


def config_label(use_rr: bool, use_sf: bool) -> str:
    return f"{'RR' if use_rr else 'No-RR'} + {'SF' if use_sf else 'No-SF'}"


@dataclass(frozen=True)
class EvalConfig:
    task: TaskKind = TaskKind.DIRECT
    cutoffs: tuple[int, ...] = (5, 10)
    top_k: int = 10
    pool_size: int = 100
    rerank_top_k: int = 30
    use_rr: bool = True
    use_sf: bool = True
    max_rounds: int = 3
    seed: int = 0
    weights: RerankWeights = field(default_factory=RerankWeights)
    prompt_budget: int | None = None
    workers: int = 1
    carry_weights: bool = False
    category_source: str = "profile"

    def __post_init__(self):
        object.__setattr__(self, "task", TaskKind(self.task))
        cutoffs = tuple(sorted(set(self.cutoffs)))
        kept = tuple(n for n in cutoffs if n <= self.top_k)
        if kept != cutoffs:
            logger.warning("dropping cutoffs above top_k=%d: %s", self.top_k, sorted(set(cutoffs) - set(kept)))
        object.__setattr__(self, "cutoffs", kept)
        if self.pool_size < self.top_k:
            raise ValueError(f"pool_size {self.pool_size} < top_k {self.top_k}")
        if self.rerank_top_k < self.top_k:
            raise ValueError(f"rerank_top_k {self.rerank_top_k} < top_k {self.top_k}")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")

    @property
    def label(self) -> str:
        return config_label(self.use_rr, self.use_sf)

    def to_json(self) -> dict:
        return {
            "task": self.task.value,
            "label": self.label,
            "cutoffs": list(self.cutoffs),
            "top_k": self.top_k,
            "pool_size": self.pool_size,
            "rerank_top_k": self.rerank_top_k,
            "use_rr": self.use_rr,
            "use_sf": self.use_sf,
            "max_rounds": self.max_rounds,
            "seed": self.seed,
            "weights": self.weights.to_json(),
            "prompt_budget": self.prompt_budget,
            "carry_weights": self.carry_weights,
            "category_source": self.category_source,
        }


@dataclass
class EvalReport:
    config: dict
    rows: list[dict]
    means: dict[str, float] = field(default_factory=dict)
    degradations: dict[str, int] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def metric_names(self) -> list[str]:
        if self.config["task"] == TaskKind.EXPLANATION.value:
            return list(TEXT_METRICS)
        names = []
        for n in self.config["cutoffs"]:
            names += [f"HR@{n}", f"NDCG@{n}"]
        return names

    def recompute_means(self) -> dict[str, float]:
        ok = [r for r in self.rows if "error" not in r]
        if not ok:
            return {m: 0.0 for m in self.metric_names}
        # fsum keeps the mean independent of row order
        return {m: math.fsum(r[m] for r in ok) / len(ok) for m in self.metric_names}

    def summary_json(self) -> dict:
        return {
            "config": self.config,
            "means": self.means,
            "n_users": sum("error" not in r for r in self.rows),
            "degradations": self.degradations,
            "violations": self.violations,
        }

    def write(self, out_dir: str | Path, stem: str) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}.json").write_text(json.dumps(self.summary_json(), indent=1, sort_keys=True) + "\n")
        with open(out_dir / f"{stem}.rows.jsonl", "w", encoding="utf-8") as fh:
            for r in self.rows:
                fh.write(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n")


class EvalContext:
    """Split, profiles and popularity shared by every configuration of one run.

    Candidate pools are cached per (user, size, seed) so paired configurations
    see identical pools.
    """

    def __init__(
        self,
        split: LooSplit,
        items: dict[str, Profile],
        users: dict[str, Profile],
        pop_index: PopularityIndex,
        dim: int,
        wv: WordVectors | None = None,
    ):
        self.split = split
        self.items = items
        self.users = users
        self.pop_index = pop_index
        self.dim = dim
        self.wv = wv
        self._pools: dict[tuple, list[Candidate]] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_store(cls, split: LooSplit, store: MemoryStore, dim: int, wv: WordVectors | None = None) -> "EvalContext":
        wanted = set(split.train.items) | {it for it, _ in split.targets.values()}
        items = {}
        for i in sorted(wanted):
            p = store.get_profile("item", i)
            items[i] = p if p is not None else Profile.empty(i, "item", dim)
        users = {}
        for u in sorted(split.targets):
            p = store.get_profile("user", u)
            if p is not None:
                users[u] = p
        return cls(split, items, users, PopularityIndex.from_dataset(split.train), dim, wv)

    def item(self, item_id: str) -> Profile:
        p = self.items.get(item_id)
        return p if p is not None else Profile.empty(item_id, "item", self.dim)

    def eval_users(self, limit: int | None = None) -> list[str]:
        users = sorted(u for u in self.split.targets if u in self.users)
        return users[:limit] if limit else users

    def pool(self, user: str, pool_size: int, seed: int) -> list[Candidate]:
        key = (user, pool_size, seed)
        with self._lock:
            cached = self._pools.get(key)
        if cached is not None:
            return cached
        ids = sample_candidates(self.split, user, pool_size, seed)
        pool = [Candidate(self.item(i), popularity(self.pop_index, i)) for i in ids]
        with self._lock:
            return self._pools.setdefault(key, pool)

    def history(self, user: str) -> list[Profile]:
        return [self.item(i) for i in self.split.history.get(user, [])]


def _rank_row(cfg: EvalConfig, user: str, gt: str, pool_ids: list[str], result, records) -> tuple[dict, list[str]]:
    row = {
        "user": user,
        "task": cfg.task.value,
        "config": cfg.label,
        "gt": gt,
        "ranked": result.ranked_items,
        "rank": rank_of(result.ranked_items, gt),
        "rounds": result.feedback_rounds,
        "parse_degradations": result.parse_degradations,
        "weights": result.weights_used.to_json(),
    }
    for n in cfg.cutoffs:
        row[f"hit@{n}"] = bool(hit_at(result.ranked_items, gt, n))
        row[f"HR@{n}"] = hit_at(result.ranked_items, gt, n)
        row[f"NDCG@{n}"] = ndcg_at(result.ranked_items, gt, n)
    problems = []
    if len(result.ranked_items) != cfg.top_k:
        problems.append(f"{user}: {len(result.ranked_items)} ranked items, expected {cfg.top_k}")
    if not set(result.ranked_items) <= set(pool_ids):
        problems.append(f"{user}: ranked ids outside the candidate pool")
    prev_hr, prev_nd = 0, 0.0
    for n in cfg.cutoffs:
        hr, nd = row[f"HR@{n}"], row[f"NDCG@{n}"]
        if nd > hr or hr < prev_hr or nd < prev_nd:
            problems.append(f"{user}: metric ordering violated at n={n}")
        prev_hr, prev_nd = hr, nd
    for a, b in zip(records, records[1:]):
        if a.hit_after:
            problems.append(f"{user}: feedback continued after a hit")
    return row, problems


def _explanation_row(ctx: EvalContext, agent: Agent, user: str, gt: str) -> dict:
    profile = ctx.users[user]
    expl = agent.generate_explanations(profile, [ctx.item(gt)])[gt]
    ref_review = ctx.split.heldout.get(user)
    reference = ref_review.text if ref_review is not None else ""
    cand, ref = text_tokens(expl), text_tokens(reference)
    emb = 0.0
    if ctx.wv is not None:
        emb = cosine(embed_text(expl, ctx.wv), embed_text(reference, ctx.wv))
    return {
        "user": user,
        "task": TaskKind.EXPLANATION.value,
        "gt": gt,
        "explanation": expl,
        "BLEU2": bleu2(cand, ref),
        "ROUGE-1": rouge_n(cand, ref, 1),
        "ROUGE-2": rouge_n(cand, ref, 2),
        "ROUGE-L": rouge_l(cand, ref),
        "EmbSim": emb,
    }


def evaluate(
    ctx: EvalContext,
    cfg: EvalConfig,
    backend,
    store: MemoryStore | None = None,
    users: Sequence[str] | None = None,
) -> EvalReport:
    """Run one configuration over every evaluation user.

    Per-user failures become ``error`` rows: counted, kept, excluded from means.
    """
    agent = Agent(
        backend,
        top_k=cfg.top_k,
        rerank_top_k=cfg.rerank_top_k,
        use_rr=cfg.use_rr,
        prompt_budget=cfg.prompt_budget,
        store=store,
        category_source=cfg.category_source,
    )
    users = list(users) if users is not None else ctx.eval_users()

    def run_user(user: str, w: RerankWeights):
        gt = ctx.split.targets[user][0]
        if cfg.task is TaskKind.EXPLANATION:
            return _explanation_row(ctx, agent, user, gt), [], w
        pool = ctx.pool(user, cfg.pool_size, cfg.seed)
        profile = ctx.users[user]
        history = ctx.history(user)
        if cfg.use_sf:
            result, records = agent.self_feedback_loop(cfg.task, profile, pool, w, gt, cfg.max_rounds, history)
        else:
            result, records = agent.recommend(cfg.task, profile, pool, w, history), []
        row, problems = _rank_row(cfg, user, gt, [c.item_id for c in pool], result, records)
        return row, problems, result.weights_used

    def guarded(user: str, w: RerankWeights):
        try:
            return run_user(user, w)
        except Exception as exc:  # noqa: BLE001 - reported per user, never dropped
            logger.error("user %s failed: %s", user, exc)
            return {"user": user, "task": cfg.task.value, "error": f"{type(exc).__name__}: {exc}"}, [], w

    outcomes = []
    if cfg.carry_weights:
        w = cfg.weights
        for u in users:
            row, problems, w = guarded(u, w)
            outcomes.append((row, problems))
    elif cfg.workers > 1:
        pool = ThreadPoolExecutor(max_workers=cfg.workers)
        try:
            futures = [pool.submit(guarded, u, cfg.weights) for u in users]
            outcomes = [f.result()[:2] for f in futures]
        except KeyboardInterrupt:
            # drop queued users, let in-flight ones finish so logs stay whole
            pool.shutdown(wait=True, cancel_futures=True)
            raise
        pool.shutdown()
    else:
        outcomes = [guarded(u, cfg.weights)[:2] for u in users]

    rows = [r for r, _ in outcomes]
    report = EvalReport(config=cfg.to_json(), rows=rows)
    report.violations = [p for _, probs in outcomes for p in probs]
    report.means = report.recompute_means()
    report.degradations = {
        "errors": sum("error" in r for r in rows),
        "parse_degradations": sum(r.get("parse_degradations", 0) for r in rows),
    }
    means = report.means
    for n in cfg.cutoffs if cfg.task is not TaskKind.EXPLANATION else ():
        if means[f"NDCG@{n}"] > means[f"HR@{n}"] + 1e-12:
            report.violations.append(f"mean NDCG@{n} exceeds mean HR@{n}")
    return report


def run_ablation(
    ctx: EvalContext,
    cfg: EvalConfig,
    backend,
    tasks: Iterable[TaskKind] = (TaskKind.DIRECT, TaskKind.SEQUENTIAL),
    store: MemoryStore | None = None,
    users: Sequence[str] | None = None,
) -> dict[str, EvalReport]:
    """Every (re-ranking, self-feedback) combination for every task, on shared pools."""
    reports = {}
    for task in tasks:
        for use_rr, use_sf in ABLATION_GRID:
            cell = replace(cfg, task=TaskKind(task), use_rr=use_rr, use_sf=use_sf)
            reports[f"{TaskKind(task).value}/{cell.label}"] = evaluate(ctx, cell, backend, store, users)
    return reports


def format_table(reports: dict[str, EvalReport]) -> str:
    """Aligned text table, one block per task, one row per configuration."""
    by_task: dict[str, list[tuple[str, EvalReport]]] = {}
    for key, rep in reports.items():
        by_task.setdefault(rep.config["task"], []).append((rep.config["label"], rep))
    lines = []
    for task, entries in by_task.items():
        metrics = entries[0][1].metric_names
        header = ["Methods"] + [m if m != "EmbSim" else "EmbSim*" for m in metrics]
        widths = [max(14, len(header[0]))] + [max(8, len(h)) for h in header[1:]]
        lines.append(f"Task: {task}")
        lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        for label, rep in entries:
            cells = [label] + [f"{rep.means.get(m, 0.0):.3f}" for m in metrics]
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
        if "EmbSim" in metrics:
            lines.append("* mean word-vector cosine; not comparable to BERTScore")
        lines.append("")
    return "\n".join(lines)
