"""Prompt templates with ``{name}`` placeholders and ``{{``/``}}`` literal braces."""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

TEMPLATE_NAMES = (
    "aspect_summary",
    "direct_rec",
    "sequential_rec",
    "explanation",
    "feedback_rr",
    "feedback_norr",
    "category_naming",
)

_TOKEN_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}|\{|\}")


class TemplateError(ValueError):
    pass


class RenderError(KeyError):
    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__(", ".join(self.missing))

    def __str__(self):
        return f"unbound placeholder(s): {', '.join(self.missing)}"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    def __post_init__(self):
        for m in _TOKEN_RE.finditer(self.body):
            if m.group(0) in ("{", "}"):
                line = self.body.count("\n", 0, m.start()) + 1
                raise TemplateError(f"stray brace in template {self.name!r} at line {line}")

    @property
    def placeholders(self) -> list[str]:
        seen: dict[str, None] = {}
        for m in _TOKEN_RE.finditer(self.body):
            if m.group(1):
                seen.setdefault(m.group(1))
        return list(seen)


@lru_cache(maxsize=None)
def load_template(name: str) -> PromptTemplate:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}")
    body = resources.files("madrec.llm").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")
    return PromptTemplate(name, body.rstrip("\n"))


def render_prompt(template: PromptTemplate | str, bindings: Mapping[str, object]) -> str:
    """Substitute every placeholder; raises RenderError naming any that are unbound."""
    if isinstance(template, str):
        template = load_template(template)
    missing = [p for p in template.placeholders if p not in bindings]
    if missing:
        raise RenderError(missing)

    def sub(m: re.Match) -> str:
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        return str(bindings[m.group(1)])

    return _TOKEN_RE.sub(sub, template.body)


def format_weight(v: float) -> str:
    return f"{v:.4g}"


# -- prompt fragments ------------------------------------------------------

ITEM_ID_RE = re.compile(r"^Item ID: (\S+)$", re.M)


def item_block(item_id: str, summaries: Mapping[str, str]) -> str:
    cats = ", ".join(summaries) or "none"
    profile = "; ".join(f"{c}: {s}" for c, s in summaries.items()) or "no profile"
    return f"Item ID: {item_id}\nCategory: {cats}\nProfile: {profile}"


def item_blocks(items: Sequence[tuple[str, Mapping[str, str]]]) -> str:
    return "\n\n".join(item_block(i, s) for i, s in items).strip()


def item_line(item_id: str, summaries: Mapping[str, str]) -> str:
    """``- title (category)`` line used for history and previous recommendations."""
    return f"- {item_id} ({', '.join(summaries) or 'none'})"
