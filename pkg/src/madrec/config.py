"""Run configuration: a YAML tree with command-line overrides on top."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .rerank import RerankWeights

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "paths": {
        "reviews": "data/synthetic/reviews.jsonl",
        "vectors": "data/synthetic/vectors.txt",
        "aspect_names": "data/synthetic/aspect_names.json",
        "work_dir": "runs/synthetic",
    },
    "corpus": {"format": "json_lines", "k_core": 5},
    "aspects": {
        "k": 8,
        "min_count": 10,
        "max_df": 0.3,
        "n_terms": 15,
        "n_init": 10,
        "max_iter": 100,
        "domain": "beauty",
        "namer": "mapping",
        "stem": False,
    },
    "profiles": {"word_limit": 10, "max_sentences": 50, "hash_dim": 64},
    "weights": {"alpha": 0.4, "beta": 0.4, "gamma": 0.2},
    "normalize_weights": False,
    "llm": {
        "backend": "mock",
        "base_url": "https://api.openai.com/v1/chat/completions",
        "model_name": "gpt-4.1-nano",
        "api_key_env": "OPENAI_API_KEY",
        "temperature": 0.0,
        "max_retries": 3,
        "request_timeout": 60.0,
        "max_in_flight": 4,
    },
    "eval": {
        "task": "direct",
        "cutoffs": [5, 10],
        "top_k": 10,
        "pool_size": 100,
        "rerank_top_k": 30,
        "use_rr": True,
        "use_sf": True,
        "max_rounds": 3,
        "prompt_budget": None,
        "workers": 4,
        "carry_weights": False,
        "category_source": "profile",
        "max_users": None,
    },
    "synth": {},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where}{key}")
        if isinstance(base[key], dict) and key != "synth":
            if not isinstance(val, dict):
                raise ConfigError(f"{where}{key} must be a mapping")
            out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


@dataclass
class RunConfig:
    data: dict
    base_dir: Path = field(default_factory=Path.cwd)
    source: Path | None = None

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: dict | None = None) -> "RunConfig":
        """Defaults, then the file (paths relative to its folder), then ``overrides``."""
        data = copy.deepcopy(DEFAULTS)
        base = Path.cwd()
        source = None
        if path is not None:
            source = Path(path)
            loaded = yaml.safe_load(source.read_text(encoding="utf-8")) or {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"{source}: top level must be a mapping")
            data = _merge(data, loaded)
            base = source.resolve().parent
        if overrides:
            data = _merge(data, overrides)
        cfg = cls(data, base, source)
        cfg.weights()  # fail early on bad weights
        return cfg

    def __getitem__(self, key: str):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def path(self, name: str) -> Path | None:
        raw = self.data["paths"].get(name)
        if raw in (None, ""):
            return None
        p = Path(raw)
        return p if p.is_absolute() else (self.base_dir / p).resolve()

    @property
    def work_dir(self) -> Path:
        return self.path("work_dir")

    def weights(self) -> RerankWeights:
        w = self.data["weights"]
        try:
            return RerankWeights.checked(
                float(w["alpha"]), float(w["beta"]), float(w["gamma"]), normalize=bool(self.data["normalize_weights"])
            )
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"invalid weights: {exc}") from exc

    def dump(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)
