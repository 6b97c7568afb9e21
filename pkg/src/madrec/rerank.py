"""Multi-factor candidate scoring: profile cosine, aspect-set overlap and popularity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .profiles import Profile
from .textvec import cosine

DEFAULT_TOP_K = 30


@dataclass(frozen=True)
class RerankWeights:
    alpha: float = 0.4
    beta: float = 0.4
    gamma: float = 0.2

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name}={v} must be a non-negative number")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValueError(f"weights {self.as_tuple()} do not sum to 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)

    @classmethod
    def normalized(cls, alpha: float, beta: float, gamma: float) -> "RerankWeights":
        """Clamp negatives to zero and rescale to sum 1."""
        vals = [max(0.0, float(v)) for v in (alpha, beta, gamma)]
        total = sum(vals)
        if total <= 0:
            raise ValueError("weights are all zero")
        return cls(vals[0] / total, vals[1] / total, vals[2] / total)

    @classmethod
    def checked(cls, alpha: float, beta: float, gamma: float, normalize: bool = False, tol: float = 1e-6):
        """Weights as supplied by a user; off-by-more-than-``tol`` sums are refused unless ``normalize``."""
        if normalize:
            return cls.normalized(alpha, beta, gamma)
        if abs(alpha + beta + gamma - 1.0) > tol:
            raise ValueError(f"weights {alpha}+{beta}+{gamma} must sum to 1 (use --normalize-weights)")
        return cls.normalized(alpha, beta, gamma)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}


@dataclass(frozen=True)
class ScoredCandidate:
    item_id: str
    s_total: float
    sim_profile: float
    sim_category: float
    pop: float


def history_categories(history: Iterable[Profile]) -> frozenset[str]:
    """C(u) as the union of the purchased items' category sets."""
    out: set[str] = set()
    for p in history:
        out |= p.categories
    return frozenset(out)


def category_similarity(cu: Iterable[str], ci: Iterable[str]) -> float:
    """Jaccard overlap of two aspect-category sets; 0 when both are empty."""
    cu, ci = set(cu), set(ci)
    union = cu | ci
    if not union:
        return 0.0
    return len(cu & ci) / len(union)


def score(
    user: Profile,
    item: Profile,
    pop: float,
    w: RerankWeights,
    user_categories: Iterable[str] | None = None,
) -> ScoredCandidate:
    """S_i for one candidate.  ``user_categories`` replaces C(u) when given."""
    if not 0.0 <= pop <= 1.0:
        raise ValueError(f"popularity {pop} outside [0, 1]")
    sim = cosine(user.embedding, item.embedding)
    cu = user.categories if user_categories is None else user_categories
    cat = category_similarity(cu, item.categories)
    return ScoredCandidate(
        item_id=item.owner_id,
        s_total=w.alpha * sim + w.beta * cat + w.gamma * pop,
        sim_profile=sim,
        sim_category=cat,
        pop=pop,
    )


def rerank(
    user: Profile,
    candidates: Sequence[tuple[Profile, float]],
    w: RerankWeights,
    top_k: int = DEFAULT_TOP_K,
    user_categories: Iterable[str] | None = None,
) -> list[ScoredCandidate]:
    """Score every candidate and keep the ``top_k`` best, highest first (ties by item id)."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if not candidates:
        raise ValueError("no candidates to rerank")
    cu = None if user_categories is None else frozenset(user_categories)
    scored = [score(user, item, pop, w, cu) for item, pop in candidates]
    scored.sort(key=lambda c: (-c.s_total, c.item_id))
    return scored[:top_k]
