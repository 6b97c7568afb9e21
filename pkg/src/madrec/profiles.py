"""Per-aspect user and item profiles built from review sentences."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .aspects import AspectModel, label_sentence, split_sentences
from .corpus import Review
from .textvec import WordVectors, embed_text

logger = logging.getLogger(__name__)

WORD_LIMIT = 10
MAX_SENTENCES = 50
GENERAL = "General"


@dataclass(frozen=True)
class SummaryRequest:
    aspect: str
    sentences: tuple[str, ...]
    word_limit: int = WORD_LIMIT

    def __post_init__(self):
        if not self.sentences:
            raise ValueError(f"no sentences to summarize for {self.aspect!r}")


Summarizer = Callable[[SummaryRequest], str]


def truncate_words(text: str, limit: int) -> str:
    return " ".join(text.split()[:limit])


def extractive_summary(req: SummaryRequest) -> str:
    """First sentence, cut to the word limit."""
    return truncate_words(req.sentences[0], req.word_limit)


def summarize_category(req: SummaryRequest, summarizer: Summarizer) -> str:
    """Run ``summarizer`` and enforce the word limit on what comes back.

    Overlong output is truncated with a warning; empty output falls back to
    the extractive summary.  Transport errors propagate.
    """
    summary = " ".join((summarizer(req) or "").split())
    if not summary:
        logger.warning("empty summary for %r, using extractive fallback", req.aspect)
        return extractive_summary(req)
    if len(summary.split()) > req.word_limit:
        logger.warning("summary for %r has %d words, truncating to %d", req.aspect, len(summary.split()), req.word_limit)
        summary = truncate_words(summary, req.word_limit)
    return summary


def group_by_category(reviews: Iterable[Review], model: AspectModel, stem: bool = False) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = {}
    for r in reviews:
        for sent in split_sentences(r.text):
            for cat in label_sentence(sent, model, stem=stem):
                groups.setdefault(cat, []).append(sent)
    # category order follows the model so downstream text is stable
    return {name: groups[name] for name in model.names if name in groups}


@dataclass(eq=False)
class Profile:
    owner_id: str
    kind: str
    summaries: dict[str, str]
    embedding: np.ndarray
    built_at: int = 0

    def __post_init__(self):
        if self.kind not in ("user", "item"):
            raise ValueError(f"profile kind must be user or item, got {self.kind!r}")
        self.embedding = np.asarray(self.embedding, dtype=np.float32)

    @property
    def categories(self) -> frozenset[str]:
        return frozenset(self.summaries)

    def text(self) -> str:
        """Concatenated summaries, the input to the profile embedding."""
        return " ".join(self.summaries.values())

    def render(self) -> str:
        """One ``- Category: summary`` line per aspect, for prompts."""
        return "\n".join(f"- {cat}: {s}" for cat, s in self.summaries.items())

    def __eq__(self, other):
        if not isinstance(other, Profile):
            return NotImplemented
        return (
            self.owner_id == other.owner_id
            and self.kind == other.kind
            and self.summaries == other.summaries
            and list(self.summaries) == list(other.summaries)
            and self.built_at == other.built_at
            and self.embedding.dtype == other.embedding.dtype
            and np.array_equal(self.embedding, other.embedding)
        )

    def to_json(self) -> dict:
        return {"owner_id": self.owner_id, "kind": self.kind, "summaries": self.summaries, "built_at": self.built_at}

    @classmethod
    def empty(cls, owner_id: str, kind: str, dim: int) -> "Profile":
        return cls(owner_id, kind, {}, np.zeros(dim, dtype=np.float32))


def build_profile(
    owner_id: str,
    kind: str,
    reviews: Sequence[Review],
    model: AspectModel,
    summarizer: Summarizer,
    wv: WordVectors,
    *,
    word_limit: int = WORD_LIMIT,
    max_sentences: int = MAX_SENTENCES,
    stem: bool = False,
) -> Profile:
    """Summarize each aspect the owner's reviews touch and embed the result.

    Only the ``max_sentences`` most recent sentences of a category reach the
    summarizer.  Owners with no labeled sentence get a single "General"
    entry from their first review sentence.
    """
    if not reviews:
        raise ValueError(f"no reviews for {kind} {owner_id}")
    reviews = sorted(reviews, key=lambda r: (r.timestamp, r.item_id, r.user_id))
    groups = group_by_category(reviews, model, stem=stem)
    summaries: dict[str, str] = {}
    for cat, sents in groups.items():
        req = SummaryRequest(cat, tuple(sents[-max_sentences:]), word_limit)
        summaries[cat] = summarize_category(req, summarizer)
    if not summaries:
        first = next((s for r in reviews for s in split_sentences(r.text)), "") or "no review text"
        summaries[GENERAL] = truncate_words(first, word_limit)
    text = " ".join(summaries.values())
    return Profile(
        owner_id=owner_id,
        kind=kind,
        summaries=summaries,
        embedding=embed_text(text, wv).values,
        built_at=max(r.timestamp for r in reviews),
    )
