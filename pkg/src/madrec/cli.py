"""Command-line front end: synth -> ingest -> extract-aspects -> build-profiles -> recommend / evaluate."""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

from .agent import Agent, TaskKind
from .aspects import AspectModel, MappingNamer, extract_aspects
from .config import ConfigError, RunConfig
from .corpus import (
    EmptyDatasetError,
    k_core_filter,
    leave_one_out_split,
    load_reviews,
    read_split_manifest,
    write_split_manifest,
)
from .evaluation import EvalConfig, EvalContext, evaluate, format_table, run_ablation
from .llm import ChatClient, LlmConfig, MockBackend
from .memory import MemoryStore
from .profiles import build_profile
from .synth import SynthConfig, generate
from .textvec import WordVectors, load_word_vectors
from .tools import LlmNamer, LlmSummarizer

logger = logging.getLogger("madrec")

# which subcommand produces each work-dir artifact
PRODUCERS = {
    "split": "ingest",
    "aspects": "extract-aspects",
    "store": "build-profiles",
}
UPSTREAM = {
    "synth": [],
    "ingest": ["reviews"],
    "extract-aspects": ["split"],
    "build-profiles": ["split", "aspects"],
    "recommend": ["split", "store"],
    "explain": ["split", "store"],
    "evaluate": ["split", "store"],
    "ablate": ["split", "store"],
}


class MissingArtifactError(FileNotFoundError):
    def __init__(self, path: Path | None, producer: str, alternative: str = ""):
        self.path = path
        self.producer = producer
        msg = f"missing {path}; run `madrec {producer}` first"
        super().__init__(msg + (f" or {alternative}" if alternative else ""))


# ---------------------------------------------------------------------------
# artifact locations


def artifact(cfg: RunConfig, name: str) -> Path:
    work = cfg.work_dir
    return {
        "split": work / "corpus" / "split.json",
        "aspects": work / "aspects.json",
        "store": work / "store",
        "reviews": cfg.path("reviews"),
    }[name]


def require(cfg: RunConfig, name: str) -> Path:
    path = artifact(cfg, name)
    if name == "reviews":
        if path is None or not path.exists():
            raise MissingArtifactError(path, "synth", "point paths.reviews at a review dump")
        return path
    ok = path.exists() and (name != "store" or any((path / "user").glob("*.json")))
    if not ok:
        raise MissingArtifactError(path, PRODUCERS[name])
    return path


def word_vectors(cfg: RunConfig) -> WordVectors:
    path = cfg.path("vectors")
    if path is not None and path.exists():
        return load_word_vectors(path)
    if path is not None:
        logger.warning("word vectors %s not found; using hashed vectors", path)
    return WordVectors.hashing(dim=int(cfg["profiles"]["hash_dim"]), seed=cfg.seed)


def backend(cfg: RunConfig, force_mock: bool):
    llm = cfg["llm"]
    if force_mock or llm["backend"] == "mock":
        return MockBackend(seed=cfg.seed)
    if llm["backend"] != "http":
        raise ConfigError(f"unknown llm backend {llm['backend']!r}")
    known = {f.name for f in fields(LlmConfig)}
    return ChatClient(LlmConfig(**{k: v for k, v in llm.items() if k in known}))


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def eval_config(cfg: RunConfig, **changes) -> EvalConfig:
    e = dict(cfg["eval"], **changes)
    return EvalConfig(
        task=TaskKind(e["task"]),
        cutoffs=tuple(e["cutoffs"]),
        top_k=int(e["top_k"]),
        pool_size=int(e["pool_size"]),
        rerank_top_k=int(e["rerank_top_k"]),
        use_rr=bool(e["use_rr"]),
        use_sf=bool(e["use_sf"]),
        max_rounds=int(e["max_rounds"]),
        seed=cfg.seed,
        weights=cfg.weights(),
        prompt_budget=e["prompt_budget"],
        workers=int(e["workers"]),
        carry_weights=bool(e["carry_weights"]),
        category_source=e["category_source"],
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(cfg: RunConfig, args) -> int:
    known = {f.name for f in fields(SynthConfig)}
    params = {k: v for k, v in (cfg["synth"] or {}).items() if k in known}
    params["seed"] = cfg.seed
    corpus = generate(SynthConfig(**params))
    out = cfg.path("reviews").parent
    paths = corpus.write(out)
    for key, target in (("reviews", cfg.path("reviews")), ("vectors", cfg.path("vectors")), ("names", cfg.path("aspect_names"))):
        if target is not None and target != paths[key]:
            shutil.move(paths[key], target)
    print(f"wrote {len(corpus.reviews)} reviews for {len(corpus.user_aspects)} users to {out}")
    return 0


def cmd_ingest(cfg: RunConfig, args) -> int:
    report = load_reviews(require(cfg, "reviews"), cfg["corpus"]["format"])
    ds = k_core_filter(report.dataset, int(cfg["corpus"]["k_core"]))
    if not ds.reviews:
        raise EmptyDatasetError(f"nothing left after {cfg['corpus']['k_core']}-core filtering")
    split = leave_one_out_split(ds)
    out = artifact(cfg, "split").parent
    write_split_manifest(split, out)
    stats = {
        "loaded": len(report.dataset),
        "skipped": report.skipped,
        "duplicates": report.duplicates,
        "k_core": int(cfg["corpus"]["k_core"]),
        "reviews": len(ds),
        "users": len(ds.users),
        "items": len(ds.items),
        "targets": len(split.targets),
        "single_review_users": split.skipped_users,
    }
    write_json(out / "ingest.json", stats)
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_extract_aspects(cfg: RunConfig, args) -> int:
    split = read_split_manifest(require(cfg, "split"))
    a = cfg["aspects"]
    if a["namer"] == "mapping":
        names = cfg.path("aspect_names")
        if names is None or not names.exists():
            raise MissingArtifactError(names, "synth", "set aspects.namer to llm")
        namer = MappingNamer.from_file(names)
    else:
        namer = LlmNamer(backend(cfg, args.mock), domain=a["domain"], n_terms=int(a["n_terms"]))
    model = extract_aspects(
        [r.text for r in split.train.reviews],
        word_vectors(cfg),
        int(a["k"]),
        namer,
        seed=cfg.seed,
        n_terms=int(a["n_terms"]),
        min_count=int(a["min_count"]),
        max_df=float(a["max_df"]),
        n_init=int(a["n_init"]),
        max_iter=int(a["max_iter"]),
    )
    model.save(artifact(cfg, "aspects"))
    for c in model.categories:
        print(f"{c.name}: {', '.join(c.terms[:8])}")
    return 0


def cmd_build_profiles(cfg: RunConfig, args) -> int:
    split = read_split_manifest(require(cfg, "split"))
    model = AspectModel.load(require(cfg, "aspects"))
    wv = word_vectors(cfg)
    summarizer = LlmSummarizer(backend(cfg, args.mock))
    p = cfg["profiles"]
    root = artifact(cfg, "store")
    # this command owns the profile folders; rebuilding starts clean so reruns match
    for kind in ("user", "item"):
        shutil.rmtree(root / kind, ignore_errors=True)
    store = MemoryStore(root)
    jobs = [(u, "user", rs) for u, rs in sorted(split.train.by_user().items())]
    jobs += [(i, "item", rs) for i, rs in sorted(split.train.by_item().items())]

    def build(job):
        owner, kind, reviews = job
        prof = build_profile(
            owner, kind, reviews, model, summarizer, wv,
            word_limit=int(p["word_limit"]), max_sentences=int(p["max_sentences"]), stem=bool(cfg["aspects"]["stem"]),
        )
        store.put_profile(prof)

    with ThreadPoolExecutor(max_workers=max(1, int(cfg["eval"]["workers"]))) as pool:
        list(pool.map(build, jobs))
    n_users = sum(1 for _, k, _ in jobs if k == "user")
    print(f"built {n_users} user and {len(jobs) - n_users} item profiles in {root}")
    return 0


def _context(cfg: RunConfig) -> tuple[EvalContext, MemoryStore]:
    split = read_split_manifest(require(cfg, "split"))
    store = MemoryStore(require(cfg, "store"))
    wv = word_vectors(cfg)
    return EvalContext.from_store(split, store, wv.dim, wv), store


def cmd_recommend(cfg: RunConfig, args) -> int:
    ctx, store = _context(cfg)
    user = args.user
    if user not in ctx.users:
        raise SystemExit(f"unknown user {user!r} (no profile in {store.root})")
    task = TaskKind(args.task)
    ecfg = eval_config(cfg)
    agent = Agent(
        backend(cfg, args.mock),
        top_k=ecfg.top_k,
        rerank_top_k=ecfg.rerank_top_k,
        use_rr=ecfg.use_rr,
        prompt_budget=ecfg.prompt_budget,
        store=store,
        category_source=ecfg.category_source,
    )
    # serving path: the held-out item sits in the pool but is never revealed to the agent
    pool = ctx.pool(user, ecfg.pool_size, cfg.seed)
    result = agent.recommend(task, ctx.users[user], pool, ecfg.weights, ctx.history(user))
    out = result.to_json()
    write_json(cfg.work_dir / "recommend" / f"{user}-{task.value}.json", out)
    print(json.dumps(out, indent=1, sort_keys=True, ensure_ascii=False))
    return 0


def cmd_explain(cfg: RunConfig, args) -> int:
    args.task = TaskKind.EXPLANATION.value
    return cmd_recommend(cfg, args)


def _check(reports) -> int:
    bad = [v for rep in reports for v in rep.violations]
    for v in bad:
        logger.error("invariant violated: %s", v)
    return 3 if bad else 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    ctx, store = _context(cfg)
    ecfg = eval_config(cfg)
    users = ctx.eval_users(cfg["eval"]["max_users"])
    report = evaluate(ctx, ecfg, backend(cfg, args.mock), store, users)
    out = cfg.work_dir / "eval"
    stem = f"{ecfg.task.value}-{ecfg.label.replace(' + ', '_')}"
    report.write(out, stem)
    table = format_table({stem: report})
    (out / f"{stem}.txt").write_text(table, encoding="utf-8")
    print(table)
    return _check([report])


def cmd_ablate(cfg: RunConfig, args) -> int:
    ctx, store = _context(cfg)
    ecfg = eval_config(cfg)
    users = ctx.eval_users(cfg["eval"]["max_users"])
    tasks = [TaskKind(t) for t in args.tasks]
    reports = run_ablation(ctx, ecfg, backend(cfg, args.mock), tasks, store, users)
    out = cfg.work_dir / "ablation"
    for key, rep in reports.items():
        rep.write(out, key.replace("/", "-").replace(" + ", "_"))
    with open(out / "pools.jsonl", "w", encoding="utf-8") as fh:
        for u in users:
            ids = [c.item_id for c in ctx.pool(u, ecfg.pool_size, ecfg.seed)]
            fh.write(json.dumps({"user": u, "pool": ids}) + "\n")
    table = format_table(reports)
    (out / "table.txt").write_text(table, encoding="utf-8")
    print(table)
    return _check(reports.values())


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "extract-aspects": cmd_extract_aspects,
    "build-profiles": cmd_build_profiles,
    "recommend": cmd_recommend,
    "explain": cmd_explain,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run config")
    common.add_argument("--seed", type=int)
    common.add_argument("--mock", action="store_true", help="force the deterministic offline backend")
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--normalize-weights", action="store_true", default=None)
    common.add_argument("--top-k", type=int)
    common.add_argument("--pool-size", type=int)
    common.add_argument("--rerank-top-k", type=int)
    common.add_argument("--max-rounds", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--carry-weights", action="store_true", default=None)
    common.add_argument("--max-users", type=int)
    common.add_argument("--work-dir", type=Path)
    common.add_argument("--dry-run", action="store_true", help="validate the config and print the plan")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="madrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write the seeded synthetic corpus")
    sub.add_parser("ingest", parents=[common], help="load reviews, k-core filter, leave-one-out split")
    sub.add_parser("extract-aspects", parents=[common], help="cluster terms into named aspect categories")
    sub.add_parser("build-profiles", parents=[common], help="summarize user and item profiles into the store")
    for name in ("recommend", "explain"):
        p = sub.add_parser(name, parents=[common], help=f"{name} for one user")
        p.add_argument("--user", required=True)
        if name == "recommend":
            p.add_argument("--task", choices=[t.value for t in TaskKind], default="direct")
    p = sub.add_parser("evaluate", parents=[common], help="leave-one-out evaluation of one configuration")
    p.add_argument("--task", choices=[t.value for t in TaskKind])
    p.add_argument("--use-rr", choices=["true", "false"])
    p.add_argument("--use-sf", choices=["true", "false"])
    p = sub.add_parser("ablate", parents=[common], help="all four RR/SF combinations")
    p.add_argument("--tasks", nargs="+", default=["direct", "sequential"], choices=["direct", "sequential"])
    return parser


def overrides_from(args) -> dict:
    over: dict = {}

    def put(section, key, val):
        if val is not None:
            over.setdefault(section, {})[key] = val

    if args.seed is not None:
        over["seed"] = args.seed
    if args.normalize_weights:
        over["normalize_weights"] = True
    for k in ("alpha", "beta", "gamma"):
        put("weights", k, getattr(args, k))
    for k in ("top_k", "pool_size", "rerank_top_k", "max_rounds", "workers", "carry_weights", "max_users"):
        put("eval", k, getattr(args, k))
    if getattr(args, "task", None) and args.command == "evaluate":
        put("eval", "task", args.task)
    for k in ("use_rr", "use_sf"):
        v = getattr(args, k, None)
        put("eval", k, None if v is None else v == "true")
    if args.work_dir is not None:
        put("paths", "work_dir", str(args.work_dir.resolve()))
    return over


def plan(cfg: RunConfig, command: str) -> list[str]:
    lines = [f"command: {command}", f"seed: {cfg.seed}", f"weights: {cfg.weights().to_json()}", f"work_dir: {cfg.work_dir}"]
    for name in UPSTREAM[command]:
        path = artifact(cfg, name)
        state = "ok" if path is not None and path.exists() else f"missing (produced by {PRODUCERS.get(name, 'synth')})"
        lines.append(f"needs {name}: {path} [{state}]")
    return lines


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = RunConfig.load(args.config, overrides_from(args))
        if args.dry_run:
            print("\n".join(plan(cfg, args.command)))
            print(cfg.dump(), end="")
            return 0
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, MissingArtifactError, EmptyDatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
