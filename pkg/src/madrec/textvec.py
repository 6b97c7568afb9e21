"""Tokenization, word vectors, mean-pooled text embeddings and cosine similarity."""
from __future__ import annotations

import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been before being
    below between both but by can could did do does doing down during each few for from further
    had has have having he her here hers herself him himself his how if in into is it its itself
    just me more most my myself no nor not now of off on once only or other our ours ourselves out
    over own same she should so some such than that the their theirs them themselves then there
    these they this those through to too under until up very was we were what when where which
    while who whom why will with would you your yours yourself yourselves
    """.split()
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; drops 1-char tokens and stopwords."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2 and t not in STOPWORDS]


class FormatError(ValueError):
    pass


def hashed_vector(token: str, dim: int, seed: int) -> np.ndarray:
    """Seeded pseudo-random unit vector for ``token``."""
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


@dataclass
class WordVectors:
    """Token -> vector table.

    With ``fallback_seed`` set, tokens missing from the table resolve to a
    deterministic hashed unit vector, so the pipeline runs without a file.
    """

    dim: int
    table: dict[str, np.ndarray] = field(default_factory=dict)
    fallback_seed: int | None = None
    skipped: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        for tok, vec in self.table.items():
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}, expected ({self.dim},)")
            self.table[tok] = vec
        self._hashed: dict[str, np.ndarray] = {}

    @classmethod
    def hashing(cls, dim: int = 64, seed: int = 0) -> "WordVectors":
        return cls(dim=dim, fallback_seed=seed)

    def __contains__(self, token: str) -> bool:
        return token in self.table or self.fallback_seed is not None

    def get(self, token: str) -> np.ndarray | None:
        vec = self.table.get(token)
        if vec is None and self.fallback_seed is not None:
            vec = self._hashed.get(token)
            if vec is None:
                vec = self._hashed.setdefault(token, hashed_vector(token, self.dim, self.fallback_seed))
        return vec


def load_word_vectors(path: str | Path) -> WordVectors:
    """Parse the plain-text ``token v1 ... vd`` format (optional ``count dim`` header).

    When rows disagree on arity the most common dimension wins and the rest
    are skipped.  Tokens are lowercased on load.
    """
    rows: list[tuple[str, list[str]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            parts = line.split()
            if not parts:
                continue
            if lineno == 0 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            rows.append((parts[0].lower(), parts[1:]))
    arity = Counter(len(vals) for _, vals in rows if vals)
    if not arity:
        raise FormatError(f"no parseable vectors in {path}")
    dim = arity.most_common(1)[0][0]  # ties go to the first row's arity
    table: dict[str, np.ndarray] = {}
    skipped = 0
    for tok, vals in rows:
        if len(vals) != dim:
            skipped += 1
            continue
        try:
            vec = np.array([float(v) for v in vals], dtype=np.float32)
        except ValueError:
            skipped += 1
            continue
        if not np.all(np.isfinite(vec)):
            skipped += 1
            continue
        table[tok] = vec
    if not table:
        raise FormatError(f"no parseable vectors in {path}")
    if skipped:
        logger.warning("skipped %d malformed vector lines in %s", skipped, path)
    return WordVectors(dim=dim, table=table, skipped=skipped)


class Embedding(NamedTuple):
    values: np.ndarray
    empty: bool = False

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def embed_text(text: str, wv: WordVectors) -> Embedding:
    """Mean of in-vocabulary token vectors, as float32; zero vector if none."""
    # sorted so the float sum is independent of token order
    vecs = [v for v in (wv.get(t) for t in sorted(tokenize(text))) if v is not None]
    if not vecs:
        return Embedding(np.zeros(wv.dim, dtype=np.float32), True)
    return Embedding(np.mean(np.asarray(vecs, dtype=np.float64), axis=0).astype(np.float32))


def cosine(a, b) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    a = np.asarray(getattr(a, "values", a), dtype=np.float64)
    b = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
