"""Scripted httpx transport that answers chat completions offline."""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import httpx
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from .errors import MockScriptExhausted
from .models import CacheKey
from .payloads import ChatRequest

_LOGGER = logging.getLogger(__name__)


class MockMatch(BaseModel):
    model_config = ConfigDict(frozen=True)

    digest: str | None = None
    message_substring: str | None = None

    @property
    def catch_all(self) -> bool:
        return self.digest is None and self.message_substring is None


class MockEntry(BaseModel):
    """One scripted reply; `times` limits how often the entry may answer."""

    match: MockMatch = Field(default_factory=MockMatch)
    response: str = ""
    finish_reason: str = "stop"
    status: int = 200
    timeout: bool = False
    times: int | None = None


_SCRIPT_ADAPTER = TypeAdapter(list[MockEntry])


def load_mock_script(path: str | Path) -> list[MockEntry]:
    """Read a JSON list of {match, response} entries."""
    with open(path, encoding="utf-8") as handle:
        return _SCRIPT_ADAPTER.validate_python(json.load(handle))


@dataclass(frozen=True)
class MockCall:
    digest: str
    model: str
    last_message: str


class ScriptedTransport(httpx.AsyncBaseTransport):
    """Serve chat completions from a script and keep a transcript of traffic.

    Digest matches win over substring matches, which win over catch-all
    entries; within each tier the first entry in script order answers.
    """

    def __init__(self, entries: Iterable[MockEntry | dict[str, Any]], latency: float = 0.0) -> None:
        self.entries: list[MockEntry] = [
            entry if isinstance(entry, MockEntry) else MockEntry.model_validate(entry)
            for entry in entries
        ]
        self.latency = latency
        self.calls: list[MockCall] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._uses: dict[int, int] = {}

    @classmethod
    def from_file(cls, path: str | Path, latency: float = 0.0) -> "ScriptedTransport":
        return cls(load_mock_script(path), latency=latency)

    def transcript(self) -> list[str]:
        """Ordered request digests; equal scripts and inputs give equal transcripts."""
        return [call.digest for call in self.calls]

    def _available(self, index: int, entry: MockEntry) -> bool:
        return entry.times is None or self._uses.get(index, 0) < entry.times

    def _find(self, request: ChatRequest, digest: str) -> tuple[int, MockEntry]:
        text = "\n".join(message.content for message in request.messages)
        tiers = (
            lambda entry: entry.match.digest == digest,
            lambda entry: entry.match.message_substring is not None
            and entry.match.message_substring in text,
            lambda entry: entry.match.catch_all,
        )
        for tier in tiers:
            for index, entry in enumerate(self.entries):
                if tier(entry) and self._available(index, entry):
                    return index, entry
        raise MockScriptExhausted(digest)

    async def handle_async_request(self, request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content or b"{}")
        chat = ChatRequest.model_validate(payload)
        digest = CacheKey.from_request(chat).digest

        self.in_flight += 1
        self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            if self.latency:
                await asyncio.sleep(self.latency)
            self.calls.append(MockCall(digest, chat.model, chat.messages[-1].content))
            index, entry = self._find(chat, digest)
            self._uses[index] = self._uses.get(index, 0) + 1
        finally:
            self.in_flight -= 1

        _LOGGER.debug("Mock answered %s with entry %d", digest[:12], index)
        if entry.timeout:
            raise httpx.ReadTimeout("scripted timeout", request=request)
        if entry.status >= 400:
            return httpx.Response(entry.status, text=entry.response or "scripted error", request=request)

        prompt_tokens = sum(len(message.content.split()) for message in chat.messages)
        body = {
            "id": f"mock-{digest[:12]}",
            "object": "chat.completion",
            "model": chat.model,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": entry.response},
                    "finish_reason": entry.finish_reason,
                }
            ],
            "usage": {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": len(entry.response.split()),
                "total_tokens": prompt_tokens + len(entry.response.split()),
            },
        }
        return httpx.Response(200, json=body, request=request)
