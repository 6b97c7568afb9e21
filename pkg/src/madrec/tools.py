"""LLM-backed category namer and aspect summarizer."""
from __future__ import annotations

import re
from typing import Sequence

from .llm.prompts import render_prompt
from .profiles import SummaryRequest

_SUMMARY_RE = re.compile(r"^\s*Summary:\s*(.+?)\s*$", re.M | re.I)
_CATEGORY_RE = re.compile(r"^\s*Category:\s*(.+?)\s*$", re.M | re.I)


class LlmSummarizer:
    """Fills the aspect-summary prompt and reads back the ``Summary:`` line."""

    def __init__(self, backend):
        self.backend = backend

    def __call__(self, req: SummaryRequest) -> str:
        prompt = render_prompt(
            "aspect_summary",
            {"aspect": req.aspect, "combined_text": "\n".join(req.sentences), "word_limit": req.word_limit},
        )
        reply = self.backend.complete(prompt, "aspect_summary") or ""
        m = _SUMMARY_RE.search(reply)
        if m:
            return m.group(1).strip().strip('"')
        # tolerate a bare sentence reply
        lines = [ln.strip() for ln in reply.splitlines() if ln.strip() and not ln.lower().startswith("aspect:")]
        return lines[0] if lines else ""


class LlmNamer:
    def __init__(self, backend, domain: str = "product", n_terms: int = 15):
        self.backend = backend
        self.domain = domain
        self.n_terms = n_terms

    def __call__(self, cluster_id: int, terms: Sequence[str]) -> str | None:
        prompt = render_prompt("category_naming", {"domain": self.domain, "terms": ", ".join(terms[: self.n_terms])})
        reply = self.backend.complete(prompt, "category_naming") or ""
        m = _CATEGORY_RE.search(reply)
        name = m.group(1) if m else (reply.strip().splitlines() or [""])[0]
        return name.strip().strip('"*') or None
