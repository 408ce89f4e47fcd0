"""Chat-completion gateways: an HTTP client and an offline scripted mock."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import httpx

LABEL_TEMPLATE = "label_cluster"
DISCOVER_TEMPLATE = "discover_relations"

EMPTY_RESPONSES = {
    LABEL_TEMPLATE: '{"category": "other"}',
    DISCOVER_TEMPLATE: '{"relations": []}',
}


class GatewayError(RuntimeError):
    """The gateway could not produce a response (network, HTTP status...)."""


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    ``template_id`` and ``questions`` identify the request for offline
    gateways; only ``model``, ``temperature`` and ``messages`` go on the wire.
    """

    template_id: str
    questions: tuple[str, ...]
    messages: tuple[dict, ...]
    model: str
    temperature: float = 0.0
    seed: int = 0
    attempt: int = 0


class ChatGateway(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


def fingerprint(template_id: str, questions: Sequence[str]) -> str:
    payload = json.dumps([template_id, sorted(q.strip() for q in questions)], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class HttpChatGateway:
    """POSTs ``{model, temperature, messages}`` and reads ``{content}`` back.

    The bearer token is read from the environment variable named by
    ``api_key_env`` at call time, so it never lands in config snapshots.
    """

    def __init__(
        self,
        url: str,
        api_key_env: str | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self.api_key_env = api_key_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, request: ChatRequest) -> str:
        headers = {}
        if self.api_key_env and os.environ.get(self.api_key_env):
            headers["Authorization"] = f"Bearer {os.environ[self.api_key_env]}"
        body = {
            "model": request.model,
            "temperature": request.temperature,
            "messages": list(request.messages),
        }
        try:
            resp = self._client.post(self.url, json=body, headers=headers)
            resp.raise_for_status()
            content = resp.json()["content"]
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise GatewayError(f"chat request failed: {exc}") from exc
        if not isinstance(content, str):
            raise GatewayError("chat response 'content' is not text")
        return content


def _as_text(response: Any) -> str:
    return response if isinstance(response, str) else json.dumps(response, ensure_ascii=False)


@dataclass
class ScriptedMockGateway:
    """Offline gateway answering from a table keyed by request fingerprint.

    A scripted value may be a list, in which case retry attempt ``n`` gets
    element ``n`` (the last one repeats). ``default="empty"`` answers unknown
    requests with an empty, schema-valid object for the template; any other
    string is returned verbatim.
    """

    script: dict[str, Any] = field(default_factory=dict)
    default: str = "empty"
    calls: list[ChatRequest] = field(default_factory=list, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, template_id: str, questions: Sequence[str], response: Any) -> str:
        key = fingerprint(template_id, questions)
        self.script[key] = response
        return key

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls.append(request)
        key = fingerprint(request.template_id, request.questions)
        if key not in self.script:
            if self.default == "empty":
                return EMPTY_RESPONSES.get(request.template_id, "{}")
            return self.default
        response = self.script[key]
        if isinstance(response, list):
            response = response[min(request.attempt, len(response) - 1)]
        return _as_text(response)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedMockGateway":
        """Load a script file.

        The JSON document may hold ``responses`` (fingerprint -> response),
        ``entries`` (objects with ``template``, ``questions`` and ``response``)
        and an optional ``default``.
        """
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        gw = cls(dict(doc.get("responses", {})), doc.get("default", "empty"))
        for entry in doc.get("entries", []):
            gw.add(entry["template"], entry["questions"], entry["response"])
        return gw


def scripted_mock_gateway(
    script: Mapping[str, Any] | None = None, default: str = "empty"
) -> ScriptedMockGateway:
    return ScriptedMockGateway(dict(script or {}), default)
