import json
from pathlib import Path

import numpy as np
import pytest

from madrec.aspects import AspectCategory, AspectModel, MappingNamer, extract_aspects
from madrec.cli import main as cli_main
from madrec.corpus import Dataset, Review, k_core_filter, leave_one_out_split
from madrec.evaluation import EvalContext
from madrec.llm import MockBackend
from madrec.memory import MemoryStore
from madrec.profiles import Profile, build_profile
from madrec.synth import SynthConfig, generate
from madrec.textvec import WordVectors
from madrec.tools import LlmSummarizer

ROOT = Path(__file__).resolve().parents[1]


def make_profile(owner, summaries, emb, kind="item", built_at=0):
    return Profile(owner, kind, dict(summaries), np.asarray(emb, dtype=np.float32), built_at)


def random_reviews(rng, n_users, n_items, per_user=(1, 8)):
    out = []
    for u in range(n_users):
        k = int(rng.integers(per_user[0], per_user[1] + 1))
        items = rng.choice(n_items, size=min(k, n_items), replace=False)
        for i in items:
            out.append(Review(f"u{u}", f"i{int(i)}", 4.0, "ok", int(rng.integers(0, 50))))
    return out


@pytest.fixture(scope="session")
def synth():
    return generate(SynthConfig())


@pytest.fixture(scope="session")
def synth_split(synth):
    return leave_one_out_split(k_core_filter(Dataset.from_reviews(synth.reviews), 5))


@pytest.fixture(scope="session")
def synth_wv(synth):
    return WordVectors(dim=SynthConfig().dim, table={k: v.astype(np.float32) for k, v in synth.vectors.items()})


@pytest.fixture(scope="session")
def synth_model(synth, synth_split, synth_wv):
    return extract_aspects([r.text for r in synth_split.train.reviews], synth_wv, 8, MappingNamer(synth.names), seed=0)


@pytest.fixture(scope="session")
def synth_profiles(synth_split, synth_model, synth_wv):
    summ = LlmSummarizer(MockBackend())
    items = {i: build_profile(i, "item", rs, synth_model, summ, synth_wv) for i, rs in synth_split.train.by_item().items()}
    users = {u: build_profile(u, "user", rs, synth_model, summ, synth_wv) for u, rs in synth_split.train.by_user().items()}
    return users, items


@pytest.fixture()
def synth_ctx(synth_split, synth_profiles, synth_wv):
    from madrec.corpus import PopularityIndex

    users, items = synth_profiles
    return EvalContext(synth_split, items, users, PopularityIndex.from_dataset(synth_split.train), synth_wv.dim, synth_wv)


CONFIG_TEXT = (
    "seed: 0\n"
    "paths:\n"
    "  reviews: data/reviews.jsonl\n"
    "  vectors: data/vectors.txt\n"
    "  aspect_names: data/aspect_names.json\n"
    "  work_dir: work\n"
    "eval:\n"
    "  workers: 4\n"
)


@pytest.fixture(scope="session")
def pipeline_config(tmp_path_factory):
    """A config whose synth/ingest/extract/build stages have already run."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "run.yaml"
    cfg.write_text(CONFIG_TEXT)
    for cmd in ("synth", "ingest", "extract-aspects", "build-profiles"):
        assert cli_main([cmd, "--config", str(cfg), "--mock"]) == 0
    return cfg


FULL_RUN = (
    ["synth"],
    ["ingest"],
    ["extract-aspects"],
    ["build-profiles"],
    ["recommend", "--user", "U0001", "--task", "direct"],
    ["recommend", "--user", "U0001", "--task", "sequential"],
    ["explain", "--user", "U0001"],
    ["evaluate", "--task", "direct", "--max-users", "40"],
    ["evaluate", "--task", "explanation", "--max-users", "40"],
    ["ablate", "--max-users", "40"],
)


def run_full_pipeline(root: Path) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "run.yaml"
    cfg.write_text(CONFIG_TEXT)
    for cmd in FULL_RUN:
        assert cli_main(cmd + ["--config", str(cfg), "--mock"]) == 0, cmd
    return root


def tree_bytes(root: Path, skip=("store/log.jsonl",)) -> dict[str, bytes]:
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.relative_to(root).as_posix().split("work/", 1)[-1] not in skip
    }


@pytest.fixture(scope="session")
def twin_runs(tmp_path_factory):
    """The whole pipeline run twice, in two fresh folders, with equal config and seed."""
    base = tmp_path_factory.mktemp("twins")
    return run_full_pipeline(base / "a"), run_full_pipeline(base / "b")


@pytest.fixture(scope="session")
def ablation_run(pipeline_config):
    """A full mock ablation over every evaluation user; returns (exit code, seconds, output folder)."""
    import time

    t0 = time.perf_counter()
    code = cli_main(["ablate", "--config", str(pipeline_config), "--mock"])
    return code, time.perf_counter() - t0, pipeline_config.parent / "work" / "ablation"
