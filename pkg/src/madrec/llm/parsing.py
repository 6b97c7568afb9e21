"""Turn free-text LLM replies into item rankings, weight proposals and explanations."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Sequence

from ..rerank import RerankWeights

WEIGHT_KEYS = ("profile_similarity", "category_similarity", "popularity")


class ParseFailure(ValueError):
    pass


def _id_pattern(ids: Sequence[str]) -> re.Pattern:
    # alternation sorted longest first, so each match is the longest id at that position
    alts = sorted(set(ids), key=lambda s: (-len(s), s))
    return re.compile("|".join(re.escape(a) for a in alts))


def find_ids(text: str, ids: Sequence[str]) -> list[str]:
    """Candidate ids in order of first occurrence, deduplicated."""
    ids = [i for i in ids if i]
    if not ids:
        return []
    out: dict[str, None] = {}
    for m in _id_pattern(ids).finditer(text):
        out.setdefault(m.group(0))
    return list(out)


@dataclass
class ParsedRanking:
    items: list[str]
    padded: int = 0


def parse_ranked_items(text: str, candidate_ids: Sequence[str], top_k: int) -> ParsedRanking:
    """Ids mentioned in ``text``, cut to ``top_k`` and padded from the candidate order.

    Raises ParseFailure if no candidate id appears at all.
    """
    found = find_ids(text or "", candidate_ids)
    if not found:
        raise ParseFailure("no candidate id in response")
    items = found[:top_k]
    want = min(top_k, len(set(candidate_ids)))
    padded = 0
    chosen = set(items)
    for cid in candidate_ids:
        if len(items) >= want:
            break
        if cid not in chosen:
            items.append(cid)
            chosen.add(cid)
            padded += 1
    return ParsedRanking(items, padded)


@dataclass
class WeightProposal:
    weights: RerankWeights
    reasoning: str = ""
    raw: dict = field(default_factory=dict)


def parse_weight_proposal(text: str) -> WeightProposal:
    """First JSON object carrying all three weight keys, clamped and renormalized."""
    decoder = json.JSONDecoder()
    text = text or ""
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except ValueError:
            continue
        if not isinstance(obj, dict) or not all(k in obj for k in WEIGHT_KEYS):
            continue
        try:
            vals = [float(obj[k]) for k in WEIGHT_KEYS]
            weights = RerankWeights.normalized(*vals)
        except (TypeError, ValueError):
            continue
        reasoning = obj.get("reasoning", "")
        return WeightProposal(weights, reasoning if isinstance(reasoning, str) else str(reasoning), obj)
    raise ParseFailure("no weight proposal object in response")


def parse_explanations(text: str, item_ids: Sequence[str]) -> dict[str, str]:
    """Map each id to the text following it on the first line that mentions it."""
    out: dict[str, str] = {}
    if not item_ids:
        return out
    pat = _id_pattern(item_ids)
    for line in (text or "").splitlines():
        m = pat.search(line)
        if not m or m.group(0) in out:
            continue
        rest = line[m.end():].lstrip(" *:-–—\t").strip()
        if rest:
            out[m.group(0)] = rest
    return out
