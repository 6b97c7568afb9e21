"""Seeded synthetic review corpus with planted aspect structure.

Items carry two aspects each and users prefer two aspects; review sentences
mention aspect terms, and the accompanying word vectors place each aspect's
terms around a shared centre so clustering can recover them.  A fraction of
users ("trend followers") end their history on a bestseller that matches
their taste only partially, so it ranks well only when popularity weighs more.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Review

ASPECTS: dict[str, tuple[str, ...]] = {
    "Scent": ("scent", "fragrance", "smell", "aroma", "perfume", "floral", "musky", "citrus", "lavender", "vanilla"),
    "Texture": ("texture", "creamy", "greasy", "silky", "thick", "runny", "lightweight", "gel", "velvety", "gritty"),
    "Packaging": ("bottle", "pump", "tube", "jar", "cap", "packaging", "nozzle", "dispenser", "seal", "container"),
    "Price": ("price", "value", "cost", "bargain", "expensive", "cheap", "affordable", "pricey", "deal", "budget"),
    "Hydration": ("moisture", "hydration", "dryness", "moisturizing", "hydrated", "flaky", "plump", "dewy", "parched", "supple"),
    "Color": ("color", "shade", "tint", "pigment", "hue", "undertone", "pinkish", "nude", "coral", "beige"),
    "Longevity": ("lasting", "longevity", "wear", "hours", "fade", "stays", "durable", "smudge", "transfer", "budge"),
    "Sensitivity": ("irritation", "redness", "rash", "sensitive", "itching", "breakout", "allergic", "gentle", "burning", "soothing"),
}

ADJECTIVES = ("great", "lovely", "decent", "awful", "fine", "superb", "okay", "poor", "nice", "perfect")
FILLERS = (
    "Arrived quickly and well wrapped.",
    "Would buy again.",
    "My sister recommended this one.",
    "Shipping took a while.",
    "Bought this as a gift.",
)


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 200
    n_items: int = 160
    n_bestsellers: int = 4
    history_min: int = 6
    history_max: int = 10
    match_prob: float = 0.8
    bestseller_in_history: float = 0.6
    trend_fraction: float = 0.7
    dim: int = 24
    term_noise: float = 0.25
    seed: int = 0


@dataclass
class SynthCorpus:
    reviews: list[Review]
    vectors: dict[str, np.ndarray]
    names: dict[str, str]
    item_aspects: dict[str, tuple[str, str]]
    user_aspects: dict[str, tuple[str, str]]
    bestsellers: list[str]
    trend_users: list[str]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "reviews": out / "reviews.jsonl",
            "vectors": out / "vectors.txt",
            "names": out / "aspect_names.json",
        }
        with open(paths["reviews"], "w", encoding="utf-8") as fh:
            for r in self.reviews:
                fh.write(json.dumps(r.to_json()) + "\n")
        with open(paths["vectors"], "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vectors)} {len(next(iter(self.vectors.values())))}\n")
            for tok in sorted(self.vectors):
                fh.write(tok + " " + " ".join(f"{v:.6f}" for v in self.vectors[tok]) + "\n")
        paths["names"].write_text(json.dumps(self.names, indent=1, sort_keys=True) + "\n")
        return paths


def _vectors(cfg: SynthConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    out = {}
    for terms in ASPECTS.values():
        centre = rng.standard_normal(cfg.dim)
        centre /= np.linalg.norm(centre)
        for t in terms:
            out[t] = centre + cfg.term_noise * rng.standard_normal(cfg.dim) / np.sqrt(cfg.dim)
    return out


def _sentence(aspect: str, rng: np.random.Generator) -> str:
    term = ASPECTS[aspect][rng.integers(len(ASPECTS[aspect]))]
    adj = ADJECTIVES[rng.integers(len(ADJECTIVES))]
    if rng.random() < 0.5:
        return f"The {term} is {adj}."
    return f"Really {adj} {term} overall."


def generate(cfg: SynthConfig = SynthConfig()) -> SynthCorpus:
    rng = np.random.default_rng(cfg.seed)
    names = list(ASPECTS)
    vectors = _vectors(cfg, rng)

    items = [f"I{n:04d}" for n in range(1, cfg.n_items + 1)]
    item_aspects = {}
    for i in items:
        a, b = rng.choice(len(names), size=2, replace=False)
        item_aspects[i] = (names[a], names[b])
    appeal = rng.pareto(2.0, size=cfg.n_items) + 1.0
    bestsellers = items[: cfg.n_bestsellers]
    regular = items[cfg.n_bestsellers:]
    reg_appeal = appeal[cfg.n_bestsellers:]

    reviews: list[Review] = []
    user_aspects = {}
    trend_users = []
    t0 = 1_500_000_000
    for u_idx in range(1, cfg.n_users + 1):
        user = f"U{u_idx:04d}"
        a, b = rng.choice(len(names), size=2, replace=False)
        prefs = (names[a], names[b])
        user_aspects[user] = prefs
        n_hist = int(rng.integers(cfg.history_min, cfg.history_max + 1))
        matching = [k for k, i in enumerate(regular) if set(item_aspects[i]) & set(prefs)]

        chosen: list[str] = []
        if rng.random() < cfg.bestseller_in_history:
            chosen.append(bestsellers[int(rng.integers(len(bestsellers)))])
        while len(chosen) < n_hist:
            pool = matching if (matching and rng.random() < cfg.match_prob) else range(len(regular))
            pool = [k for k in pool if regular[k] not in chosen]
            w = reg_appeal[pool]
            chosen.append(regular[pool[int(rng.choice(len(pool), p=w / w.sum()))]])
        order = rng.permutation(len(chosen))
        chosen = [chosen[k] for k in order]

        trend = rng.random() < cfg.trend_fraction
        if trend:
            options = [i for i in bestsellers if i not in chosen and len(set(item_aspects[i]) & set(prefs)) == 1]
            options = options or [i for i in bestsellers if i not in chosen]
            last = options[int(rng.integers(len(options)))]
            trend_users.append(user)
        else:
            both = [i for i in regular if set(item_aspects[i]) == set(prefs) and i not in chosen]
            some = [i for i in regular if set(item_aspects[i]) & set(prefs) and i not in chosen]
            options = both or some
            last = options[int(rng.integers(len(options)))]
        chosen.append(last)

        ts = t0 + int(rng.integers(0, 86_400 * 30))
        for item in chosen:
            ts += int(rng.integers(3_600, 86_400 * 20))
            mentioned = [x for x in item_aspects[item] if x in prefs] or list(item_aspects[item])
            sents = [_sentence(x, rng) for x in mentioned]
            if rng.random() < 0.3:
                sents.append(FILLERS[int(rng.integers(len(FILLERS)))])
            reviews.append(Review(user, item, float(rng.integers(3, 6)), " ".join(sents), ts))

    name_map = {t: name for name, terms in ASPECTS.items() for t in terms}
    return SynthCorpus(reviews, vectors, name_map, item_aspects, user_aspects, bestsellers, trend_users)
