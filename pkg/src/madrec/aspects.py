"""Aspect extraction: cluster review-term embeddings, name the clusters, tag sentences."""
from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .textvec import WordVectors, tokenize

logger = logging.getLogger(__name__)

# per-domain category counts observed on the Amazon corpora
DEFAULT_K = {"beauty": 13, "sports": 10, "toys": 12}


class UnnamedClusterError(KeyError):
    def __init__(self, cluster_id, terms):
        self.cluster_id = cluster_id
        self.terms = list(terms)
        super().__init__(f"no name for cluster {cluster_id} (top terms: {', '.join(self.terms)})")


@dataclass(frozen=True)
class AspectCategory:
    name: str
    terms: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("category name must be non-empty")
        if not self.terms:
            raise ValueError(f"category {self.name!r} has no terms")
        if len(set(self.terms)) != len(self.terms) or any(t != t.lower() for t in self.terms):
            raise ValueError(f"terms of {self.name!r} must be distinct and lowercase")


@dataclass(frozen=True)
class AspectModel:
    categories: tuple[AspectCategory, ...]
    term_index: dict[str, frozenset[str]] = field(init=False, compare=False)

    def __post_init__(self):
        names = [c.name for c in self.categories]
        if len(set(names)) != len(names):
            raise ValueError("category names must be unique")
        index: dict[str, set[str]] = {}
        for c in self.categories:
            for t in c.terms:
                index.setdefault(t, set()).add(c.name)
        object.__setattr__(self, "term_index", {t: frozenset(v) for t, v in index.items()})

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.categories]

    def to_json(self) -> dict:
        return {"categories": [{"name": c.name, "terms": list(c.terms)} for c in self.categories]}

    @classmethod
    def from_json(cls, data: dict) -> "AspectModel":
        return cls(tuple(AspectCategory(c["name"], tuple(c["terms"])) for c in data["categories"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AspectModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# clustering


@dataclass
class ClusterResult:
    k: int
    tokens: list[str]
    centroids: np.ndarray
    assignment: dict[str, int]
    inertia: float
    history: list[float] = field(default_factory=list)

    def members(self, cluster: int) -> list[str]:
        return [t for t in self.tokens if self.assignment[t] == cluster]


class InertiaIncreaseError(AssertionError):
    pass


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = ((X - X[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        centers.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[centers].copy()


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int):
    history: list[float] = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, C)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), new_labels].sum()))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        point_d2 = d2[np.arange(len(X)), labels]
        C = C.copy()
        taken: set[int] = set()
        for j in range(C.shape[0]):
            mask = labels == j
            if mask.any():
                C[j] = X[mask].mean(axis=0)
                continue
            # empty cluster: move it onto the worst-served point not already used
            for idx in np.argsort(-point_d2, kind="stable"):
                if int(idx) not in taken:
                    taken.add(int(idx))
                    C[j] = X[idx]
                    break
    d2 = _sq_dists(X, C)
    labels = d2.argmin(axis=1)
    history.append(float(d2[np.arange(len(X)), labels].sum()))
    return C, labels, history


def _check_history(history: Sequence[float]) -> None:
    for prev, cur in zip(history, history[1:]):
        if cur > prev + 1e-9 * max(1.0, abs(prev)):
            raise InertiaIncreaseError(f"k-means inertia increased: {prev} -> {cur}")


def cluster_terms(
    wv: WordVectors,
    vocab: Iterable[str],
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    n_init: int = 1,
) -> ClusterResult:
    """Lloyd's k-means with k-means++ seeding over the vectors of ``vocab``.

    With ``n_init`` > 1 the lowest-inertia restart is kept.  Every run checks
    that inertia never increases between iterations.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens = sorted(t for t in set(vocab) if wv.get(t) is not None)
    if len(tokens) < k:
        raise ValueError(f"only {len(tokens)} in-vocabulary tokens for k={k}")
    X = np.asarray([wv.get(t) for t in tokens], dtype=np.float64)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        C, labels, history = _lloyd(X, _kmeanspp(X, k, rng), max_iter)
        _check_history(history)
        if best is None or history[-1] < best[2][-1]:
            best = (C, labels, history)
    C, labels, history = best
    return ClusterResult(
        k=k,
        tokens=tokens,
        centroids=C,
        assignment={t: int(c) for t, c in zip(tokens, labels)},
        inertia=history[-1],
        history=history,
    )


def top_terms(cr: ClusterResult, wv: WordVectors, cluster: int, m: int) -> list[str]:
    """Closest ``m`` members to the centroid; equal distances fall back to token order."""
    if not 0 <= cluster < cr.k:
        raise KeyError(f"no cluster {cluster}")
    centroid = cr.centroids[cluster]
    scored = []
    for t in cr.members(cluster):
        d = float(((np.asarray(wv.get(t), dtype=np.float64) - centroid) ** 2).sum())
        scored.append((d, t))
    scored.sort()
    return [t for _, t in scored[:m]]


def select_vocab(texts: Iterable[str], min_count: int = 10, max_df: float = 0.3) -> set[str]:
    """Tokens with corpus frequency >= min_count and document frequency <= max_df."""
    tf: Counter[str] = Counter()
    df: Counter[str] = Counter()
    n_docs = 0
    for text in texts:
        toks = tokenize(text)
        tf.update(toks)
        df.update(set(toks))
        n_docs += 1
    if not n_docs:
        return set()
    return {t for t, c in tf.items() if c >= min_count and df[t] / n_docs <= max_df}


# ---------------------------------------------------------------------------
# naming

CategoryNamer = Callable[[int, Sequence[str]], "str | None"]


class MappingNamer:
    """Names clusters from a JSON map keyed by cluster index or anchor term.

    An index key wins; otherwise the first cluster term (in representativeness
    order) present in the map decides.
    """

    def __init__(self, mapping: dict):
        self.mapping = {str(k).lower(): v for k, v in mapping.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "MappingNamer":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def __call__(self, cluster_id: int, terms: Sequence[str]) -> str | None:
        if str(cluster_id) in self.mapping:
            return self.mapping[str(cluster_id)]
        for t in terms:
            if t in self.mapping:
                return self.mapping[t]
        return None


def name_categories(clusters: Sequence[tuple[int, Sequence[str]]], namer: CategoryNamer) -> list[AspectCategory]:
    """Attach a name to every cluster; repeated names become "Name-2", "Name-3", ..."""
    out: list[AspectCategory] = []
    used: Counter[str] = Counter()
    taken: set[str] = set()
    for cid, terms in clusters:
        name = (namer(cid, terms) or "").strip()
        if not name:
            raise UnnamedClusterError(cid, terms)
        used[name] += 1
        final = name if used[name] == 1 else f"{name}-{used[name]}"
        while final in taken:
            used[name] += 1
            final = f"{name}-{used[name]}"
        taken.add(final)
        out.append(AspectCategory(final, tuple(terms)))
    return out


def extract_aspects(
    texts: Sequence[str],
    wv: WordVectors,
    k: int,
    namer: CategoryNamer,
    *,
    seed: int = 0,
    n_terms: int = 15,
    min_count: int = 10,
    max_df: float = 0.3,
    n_init: int = 10,
    max_iter: int = 100,
) -> AspectModel:
    vocab = select_vocab(texts, min_count=min_count, max_df=max_df)
    cr = cluster_terms(wv, vocab, k, seed=seed, max_iter=max_iter, n_init=n_init)
    logger.info("clustered %d terms into %d groups (inertia %.4f)", len(cr.tokens), k, cr.inertia)
    clusters = [(j, top_terms(cr, wv, j, n_terms)) for j in range(k)]
    return AspectModel(tuple(name_categories(clusters, namer)))


# ---------------------------------------------------------------------------
# sentence tagging

_SUFFIXES = ("ing", "edly", "ed", "ly", "es", "s")


def light_stem(token: str) -> str:
    for suf in _SUFFIXES:
        if token.endswith(suf) and len(token) - len(suf) >= 3:
            return token[: -len(suf)]
    return token


def label_sentence(sentence: str, model: AspectModel, stem: bool = False) -> set[str]:
    """Every category with at least one term among the sentence tokens."""
    toks = set(tokenize(sentence))
    if stem:
        toks = {light_stem(t) for t in toks}
        index: dict[str, set[str]] = {}
        for term, cats in model.term_index.items():
            index.setdefault(light_stem(term), set()).update(cats)
    else:
        index = model.term_index
    labels: set[str] = set()
    for t in toks:
        labels.update(index.get(t, ()))
    return labels


_SENT_RE = re.compile(r"[^.!?]+")


def split_sentences(text: str) -> list[str]:
    """Split on . ! ? and collapse inner whitespace (abbreviations split too)."""
    return [" ".join(s.split()) for s in _SENT_RE.findall(text) if s.strip()]
