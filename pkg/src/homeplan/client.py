"""Language-model access: chat clients and structured-output recovery."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol

import httpx

logger = logging.getLogger(__name__)


class ParseFailure(ValueError):
    """No structured object could be recovered from model output."""


def _reject_constant(name: str) -> Any:
    raise ValueError(f"non-finite constant {name}")


_DECODER = json.JSONDecoder(parse_constant=_reject_constant)


def _loads(text: str) -> Any:
    obj, end = _DECODER.raw_decode(text)
    if text[end:].strip():
        raise ValueError("trailing data")
    return obj


def recover_structured(text: str) -> dict | list:
    """Return the JSON object or array carried by ``text``.

    The whole text is tried first. Otherwise every ``{``/``[`` position is
    tried as the start of a document and the longest one that decodes wins
    (earliest start on ties).
    """
    stripped = text.strip()
    try:
        whole = _loads(stripped)
    except ValueError:
        pass
    else:
        if isinstance(whole, (dict, list)):
            return whole
    best: tuple[int, int, Any] | None = None
    for start, ch in enumerate(text):
        if ch not in "{[":
            continue
        try:
            obj, end = _DECODER.raw_decode(text, start)
        except ValueError:
            continue
        span = end - start
        if best is None or span > best[0]:
            best = (span, start, obj)
    if best is None:
        raise ParseFailure("no structured object found in model output")
    return best[2]


# ---------------------------------------------------------------------------
# requests and clients


@dataclass(frozen=True)
class ModelRequest:
    prompt: str
    model_name: str = "scripted"
    temperature: float = 0.0
    max_output: int = 2048
    options: Mapping[str, Any] = field(default_factory=dict)
    # (task id, stage); used only by scripted fixtures, never sent to a provider
    tag: tuple[str, str] | None = None

    def __post_init__(self) -> None:
        if self.temperature != 0:
            raise ValueError("pipeline calls are decoded with temperature 0")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    usage: Mapping[str, int] | None = None


class ClientErrorKind(str, Enum):
    TRANSPORT_FAILURE = "TRANSPORT_FAILURE"
    AUTH_FAILURE = "AUTH_FAILURE"
    TIMEOUT = "TIMEOUT"
    MISSING_SCRIPT = "MISSING_SCRIPT"


class ModelClientError(RuntimeError):
    def __init__(self, kind: ClientErrorKind, message: str, attempts: int = 1):
        super().__init__(message)
        self.kind = kind
        self.attempts = attempts


class ChatClient(Protocol):
    def complete_chat(self, req: ModelRequest) -> ModelResponse: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class OpenAIChatClient:
    """OpenAI-compatible ``/chat/completions`` over HTTPS.

    HTTP 5xx and timeouts are retried (up to ``retries`` times, fixed
    backoff); 4xx responses fail immediately.
    """

    backoff = (1.0, 2.0, 4.0)

    def __init__(self, base_url: str, api_key_env: str = "OPENAI_API_KEY",
                 retries: int = 3, timeout: float = 120.0,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.api_key = os.environ.get(api_key_env)
        if not self.api_key:
            raise ModelClientError(ClientErrorKind.AUTH_FAILURE,
                                   f"environment variable {api_key_env} is not set")
        self.retries = retries
        self.sleep = sleep
        self._http = httpx.Client(timeout=timeout, transport=transport)

    def _payload(self, req: ModelRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": req.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output,
        }
        body.update(req.options)
        return body

    def complete_chat(self, req: ModelRequest) -> ModelResponse:
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last: ModelClientError | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff[min(attempt - 1, len(self.backoff) - 1)])
            try:
                resp = self._http.post(self.url, json=self._payload(req), headers=headers)
            except httpx.TimeoutException as exc:
                last = ModelClientError(ClientErrorKind.TIMEOUT, str(exc), attempt + 1)
                continue
            except httpx.TransportError as exc:
                last = ModelClientError(ClientErrorKind.TRANSPORT_FAILURE, str(exc),
                                        attempt + 1)
                continue
            if resp.status_code >= 500:
                last = ModelClientError(ClientErrorKind.TRANSPORT_FAILURE,
                                        f"HTTP {resp.status_code}", attempt + 1)
                logger.warning("provider returned %s (attempt %d)",
                               resp.status_code, attempt + 1)
                continue
            if resp.status_code in (401, 403):
                raise ModelClientError(ClientErrorKind.AUTH_FAILURE,
                                       f"HTTP {resp.status_code}", attempt + 1)
            if resp.status_code >= 400:
                raise ModelClientError(ClientErrorKind.TRANSPORT_FAILURE,
                                       f"HTTP {resp.status_code}: {resp.text[:200]}",
                                       attempt + 1)
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ModelClientError(ClientErrorKind.TRANSPORT_FAILURE,
                                       f"malformed provider response: {exc}",
                                       attempt + 1) from None
            usage = data.get("usage") or None
            if usage:
                usage = {k: int(v) for k, v in usage.items()
                         if k in ("prompt_tokens", "completion_tokens")}
            return ModelResponse(text, usage)
        assert last is not None
        raise last

    def close(self) -> None:
        self._http.close()


class ScriptedClient:
    """Replays canned responses.

    Lookup order: SHA-256 of the exact prompt, then ``"<task>/<stage>"`` from
    the request tag.
    """

    def __init__(self, responses: Mapping[str, str]):
        self.responses = dict(responses)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ScriptedClient":
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in doc.items()):
            raise ValueError(f"{path}: scripted fixture must map strings to strings")
        return cls(doc)

    def complete_chat(self, req: ModelRequest) -> ModelResponse:
        digest = prompt_digest(req.prompt)
        if digest in self.responses:
            return ModelResponse(self.responses[digest])
        if req.tag is not None:
            key = "/".join(req.tag)
            if key in self.responses:
                return ModelResponse(self.responses[key])
        raise ModelClientError(ClientErrorKind.MISSING_SCRIPT,
                               f"no scripted response for {req.tag or digest}")


class CountingClient:
    """Wraps a client and counts calls (thread-safe)."""

    def __init__(self, inner: ChatClient):
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def complete_chat(self, req: ModelRequest) -> ModelResponse:
        with self._lock:
            self.calls += 1
        return self.inner.complete_chat(req)


def make_client(target: str) -> ChatClient:
    """``scripted:PATH`` or an endpoint base URL."""
    if target.startswith("scripted:"):
        return ScriptedClient.from_file(target[len("scripted:"):])
    if target.startswith(("http://", "https://")):
        return OpenAIChatClient(target)
    raise ValueError(f"unrecognized client {target!r}")
