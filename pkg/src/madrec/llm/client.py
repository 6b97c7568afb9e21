"""Chat-completion client over JSON/HTTP with retry, backoff and an in-flight bound."""
from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import asdict, dataclass, field

import httpx

logger = logging.getLogger(__name__)

RETRY_STATUS = frozenset({429, 500, 502, 503, 504})


class LlmError(RuntimeError):
    pass


class LlmTransportError(LlmError):
    def __init__(self, message: str, attempts: list[str]):
        super().__init__(f"{message} after {len(attempts)} attempt(s): {'; '.join(attempts)}")
        self.attempts = attempts


class LlmProtocolError(LlmError):
    pass


@dataclass
class LlmConfig:
    base_url: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-4.1-nano"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    request_timeout: float = 60.0
    max_in_flight: int = 4
    backoff_base: float = 0.5
    backoff_max: float = 30.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass
class ChatExchange:
    prompt: str
    config: dict
    response_text: str | None = None
    latency: float = 0.0
    retries_used: int = 0
    attempts: list[str] = field(default_factory=list)


class ChatClient:
    """Live backend.  Safe to share between threads."""

    def __init__(self, cfg: LlmConfig, http: httpx.Client | None = None, sleep=time.sleep):
        self.cfg = cfg
        self._http = http
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)

    def _client(self) -> httpx.Client:
        if self._http is None:
            self._http = httpx.Client(timeout=self.cfg.request_timeout)
        return self._http

    def _headers(self) -> dict:
        key = os.environ.get(self.cfg.api_key_env)
        if not key:
            raise LlmError(f"environment variable {self.cfg.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def exchange(self, prompt: str) -> ChatExchange:
        body = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        ex = ChatExchange(prompt=prompt, config=asdict(self.cfg))
        headers = self._headers()
        start = time.monotonic()
        for attempt in range(self.cfg.max_retries + 1):
            delay = min(self.cfg.backoff_max, self.cfg.backoff_base * 2**attempt)
            try:
                with self._slots:
                    resp = self._client().post(self.cfg.base_url, json=body, headers=headers)
            except httpx.TransportError as exc:
                ex.attempts.append(f"{type(exc).__name__}: {exc}")
            else:
                if resp.status_code in RETRY_STATUS:
                    ex.attempts.append(f"HTTP {resp.status_code}")
                    retry_after = resp.headers.get("retry-after")
                    if retry_after and retry_after.replace(".", "", 1).isdigit():
                        delay = min(self.cfg.backoff_max, float(retry_after))
                elif resp.status_code >= 400:
                    ex.attempts.append(f"HTTP {resp.status_code}")
                    raise LlmTransportError("request rejected", ex.attempts)
                else:
                    ex.retries_used = attempt
                    ex.latency = time.monotonic() - start
                    ex.response_text = _extract_content(resp)
                    return ex
            if attempt < self.cfg.max_retries:
                logger.info("retrying chat completion in %.2fs (%s)", delay, ex.attempts[-1])
                self._sleep(delay)
        raise LlmTransportError("chat completion failed", ex.attempts)

    def complete(self, prompt: str, template: str | None = None) -> str:
        return self.exchange(prompt).response_text


def _extract_content(resp: httpx.Response) -> str:
    try:
        data = resp.json()
    except ValueError as exc:
        raise LlmProtocolError(f"non-JSON reply: {resp.text[:200]!r}") from exc
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise LlmProtocolError(f"unexpected reply shape: {str(data)[:200]}") from exc
    if not isinstance(content, str):
        raise LlmProtocolError("message content is not a string")
    return content
