"""Completion backends, prompt templates and reply parsing."""
from typing import Protocol

from .client import ChatClient, ChatExchange, LlmConfig, LlmError, LlmProtocolError, LlmTransportError
from .mock import MockBackend
from .parsing import ParseFailure, parse_explanations, parse_ranked_items, parse_weight_proposal
from .prompts import TEMPLATE_NAMES, PromptTemplate, RenderError, load_template, render_prompt


class Backend(Protocol):
    def complete(self, prompt: str, template: str | None = None) -> str: ...


__all__ = [
    "Backend",
    "ChatClient",
    "ChatExchange",
    "LlmConfig",
    "LlmError",
    "LlmProtocolError",
    "LlmTransportError",
    "MockBackend",
    "ParseFailure",
    "PromptTemplate",
    "RenderError",
    "TEMPLATE_NAMES",
    "load_template",
    "parse_explanations",
    "parse_ranked_items",
    "parse_weight_proposal",
    "render_prompt",
]
