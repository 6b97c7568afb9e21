"""Deterministic stand-in for the chat backend.

Replies are a pure function of (template name, prompt text):

* aspect_summary: first review sentence, cut to the word limit
* direct_rec / sequential_rec: the first top-k candidate ids in prompt order
* explanation: ``<id>: matches user profile on <first shared category>``
* feedback_rr: moves 0.1 of weight from the largest to the smallest component
* feedback_norr: the candidate list reversed
* category_naming: the top two terms joined
"""
from __future__ import annotations

import json
import re

from .prompts import ITEM_ID_RE

_SIGNATURES = (
    ("feedback_rr", "weight analysis expert"),
    ("feedback_norr", "needs to improve its strategy"),
    ("aspect_summary", "builds personalized user profiles"),
    ("category_naming", "interpretable aspect category name"),
    ("explanation", "explain the recommendation reason"),
    ("sequential_rec", "[User Purchase History]"),
    ("direct_rec", "You are a smart recommendation agent."),
)

_TOP_K_RE = re.compile(r"Choose the top (\d+) products")
_WEIGHT_RE = {
    "alpha": re.compile(r"^- Profile similarity: ([0-9.eE+-]+)$", re.M),
    "beta": re.compile(r"^- Category similarity: ([0-9.eE+-]+)$", re.M),
    "gamma": re.compile(r"^- Popularity: ([0-9.eE+-]+)$", re.M),
}


def detect_template(prompt: str) -> str:
    for name, marker in _SIGNATURES:
        if marker in prompt:
            return name
    raise ValueError("prompt matches no known template")


def _section(prompt: str, header: str) -> str:
    start = prompt.find(header)
    if start < 0:
        return ""
    start += len(header)
    end = prompt.find("\n[", start)
    return prompt[start:] if end < 0 else prompt[start:end]


def _candidates(prompt: str) -> list[tuple[str, list[str]]]:
    out = []
    for m in ITEM_ID_RE.finditer(prompt):
        cat_line = prompt[m.end():].split("\n", 2)[1] if prompt[m.end():].count("\n") else ""
        cats = []
        if cat_line.startswith("Category: ") and cat_line != "Category: none":
            cats = [c.strip() for c in cat_line[len("Category: "):].split(",")]
        out.append((m.group(1), cats))
    return out


def _top_k(prompt: str, default: int = 10) -> int:
    m = _TOP_K_RE.search(prompt)
    return int(m.group(1)) if m else default


def _ranked_reply(ids: list[str]) -> str:
    return "\n".join(f"{n}. {i}" for n, i in enumerate(ids, 1))


def rotate_weights(alpha: float, beta: float, gamma: float, step: float = 0.1) -> tuple[float, float, float]:
    """Shift ``step`` (or what is left) from the largest weight to the smallest; ties go to the earlier one."""
    w = [alpha, beta, gamma]
    hi = max(range(3), key=lambda i: (w[i], -i))
    lo = min(range(3), key=lambda i: (w[i], i))
    if hi == lo:
        return alpha, beta, gamma
    moved = min(step, w[hi])
    w[hi] -= moved
    w[lo] += moved
    return tuple(round(v, 10) for v in w)


class MockBackend:
    """Offline backend; ``seed`` is accepted for interface parity and never changes a reply."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, prompt: str, template: str | None = None) -> str:
        name = template or detect_template(prompt)
        return getattr(self, f"_{name}")(prompt)

    def _aspect_summary(self, prompt: str) -> str:
        aspect = re.findall(r"^Aspect: (.*)$", prompt, re.M)[-1]
        m = re.search(r'"""\n(.*?)\n"""', prompt, re.S)
        first = m.group(1).split("\n")[0] if m else ""
        limit = re.search(r"within (\d+) words", prompt)
        words = first.split()[: int(limit.group(1)) if limit else 10]
        return f"Aspect: {aspect}\nSummary: {' '.join(words)}"

    def _direct_rec(self, prompt: str) -> str:
        ids = [i for i, _ in _candidates(prompt)]
        return _ranked_reply(ids[: _top_k(prompt)])

    _sequential_rec = _direct_rec

    def _explanation(self, prompt: str) -> str:
        user_cats = re.findall(r"(?:^|\s)- ([^:\n]+?): ", _section(prompt, "[User Profile]"))
        lines = []
        for item_id, cats in _candidates(prompt)[: _top_k(prompt)]:
            shared = [c for c in cats if c in user_cats]
            on = (shared or cats or ["general fit"])[0]
            lines.append(f"- {item_id}: matches user profile on {on}")
        return "Explanation:\n" + "\n".join(lines)

    def _feedback_rr(self, prompt: str) -> str:
        current = {}
        for key, pat in _WEIGHT_RE.items():
            m = pat.search(prompt)
            current[key] = float(m.group(1)) if m else {"alpha": 0.4, "beta": 0.4, "gamma": 0.2}[key]
        a, b, g = rotate_weights(current["alpha"], current["beta"], current["gamma"])
        proposal = {
            "profile_similarity": a,
            "category_similarity": b,
            "popularity": g,
            "reasoning": "shift weight from the dominant factor to the weakest one",
        }
        return "Analysis: rotating weight mass.\n" + json.dumps(proposal, indent=4)

    def _feedback_norr(self, prompt: str) -> str:
        ids = [i for i, _ in _candidates(_section(prompt, "[All Candidate Items]"))]
        return _ranked_reply(ids[::-1][: _top_k(prompt)])

    def _category_naming(self, prompt: str) -> str:
        m = re.search(r"reviews:\n(.*)$", prompt, re.M)
        terms = [t.strip() for t in (m.group(1) if m else "").split(",") if t.strip()]
        return f"Category: {' & '.join(terms[:2]) or 'Misc'}"
