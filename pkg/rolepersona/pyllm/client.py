"""Async OpenAI-compatible chat-completions client."""

from __future__ import annotations

import asyncio
import copy
import json
import logging
from typing import Any, Awaitable, Callable, Iterable, Mapping

import httpx

from .cache import ResponseCache
from .const import (
    BASE_URL,
    CHAT_COMPLETIONS_PATH,
    DEFAULT_BACKOFF_BASE,
    DEFAULT_CONCURRENCY,
    DEFAULT_HEADERS,
    DEFAULT_MAX_TOKENS,
    DEFAULT_RETRY_BUDGET,
    DEFAULT_TIMEOUT,
    MOCK_BASE_URL,
    RETRYABLE_STATUS,
)
from .errors import EndpointError, GatewayTimeout, InvalidRequest, RateLimited
from .mock import ScriptedTransport
from .models import CacheKey, GatewayStats
from .payloads import ChatCompletionResponse, ChatMessage, ChatRequest, ChatResponse

_LOGGER = logging.getLogger(__name__)

Sleeper = Callable[[float], Awaitable[None]]


class _SharedState:
    """HTTP client and lock shared by every handle derived from one gateway."""

    def __init__(self) -> None:
        self.client: httpx.AsyncClient | None = None
        self.lock = asyncio.Lock()


class LLMGatewayClient:
    """Chat-completions access with caching, retries and a concurrency limit."""

    def __init__(
        self,
        endpoint_url: str | None = BASE_URL,
        api_key: str | None = None,
        models: Mapping[str, str] | None = None,
        *,
        retry_budget: int = DEFAULT_RETRY_BUDGET,
        backoff_base: float = DEFAULT_BACKOFF_BASE,
        timeout: float = DEFAULT_TIMEOUT,
        concurrency: int = DEFAULT_CONCURRENCY,
        cache: ResponseCache | None = None,
        transport: httpx.AsyncBaseTransport | None = None,
        sleep: Sleeper = asyncio.sleep,
    ) -> None:
        if retry_budget < 1:
            raise ValueError("retry_budget must be at least 1")
        if concurrency < 1:
            raise ValueError("concurrency must be at least 1")
        self.endpoint_url = (endpoint_url or BASE_URL).rstrip("/")
        self.api_key = api_key
        self.models: dict[str, str] = dict(models or {})
        self.retry_budget = retry_budget
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.concurrency = concurrency
        self.cache = cache
        self.transport = transport
        self.stats = GatewayStats()

        self._sleep = sleep
        self._semaphore = asyncio.Semaphore(concurrency)
        self._shared = _SharedState()

    @classmethod
    def scripted(
        cls,
        entries: Iterable[Any],
        models: Mapping[str, str] | None = None,
        **kwargs: Any,
    ) -> "LLMGatewayClient":
        """Gateway whose only backend is a scripted transport."""
        latency = kwargs.pop("latency", 0.0)
        return cls(
            MOCK_BASE_URL,
            models=models,
            transport=ScriptedTransport(entries, latency=latency),
            **kwargs,
        )

    @property
    def is_mock(self) -> bool:
        return isinstance(self.transport, ScriptedTransport)

    def with_concurrency_limit(self, n: int) -> "LLMGatewayClient":
        """Handle sharing cache, stats and HTTP client, with at most n requests in flight."""
        if n < 1:
            raise ValueError("concurrency limit must be at least 1")
        handle = copy.copy(self)
        handle.concurrency = n
        handle._semaphore = asyncio.Semaphore(n)
        return handle

    def resolve_model(self, alias_or_model: str) -> str:
        return self.models.get(alias_or_model, alias_or_model)

    async def close(self) -> None:
        """Close the underlying HTTP client and the cache."""
        if self._shared.client:
            await self._shared.client.aclose()
            self._shared.client = None
        if self.cache is not None:
            self.cache.close()

    async def _ensure_http_client(self) -> httpx.AsyncClient:
        async with self._shared.lock:
            if self._shared.client is None:
                headers = dict(DEFAULT_HEADERS)
                if self.api_key:
                    headers["Authorization"] = f"Bearer {self.api_key}"
                self._shared.client = httpx.AsyncClient(
                    base_url=self.endpoint_url,
                    headers=headers,
                    http2=self.transport is None,
                    timeout=self.timeout,
                    transport=self.transport,
                )
        return self._shared.client

    async def complete(
        self,
        model: str,
        messages: Iterable[ChatMessage | Mapping[str, str]],
        *,
        temperature: float = 0.0,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        seed: int | None = None,
    ) -> ChatResponse:
        """Build a request from an alias (or model name) and message list, then chat."""
        try:
            request = ChatRequest(
                model=self.resolve_model(model),
                messages=tuple(
                    m if isinstance(m, ChatMessage) else ChatMessage.model_validate(m)
                    for m in messages
                ),
                temperature=temperature,
                max_tokens=max_tokens,
                seed=seed,
            )
        except ValueError as exc:
            raise InvalidRequest(str(exc)) from exc
        return await self.chat(request)

    async def chat(self, request: ChatRequest) -> ChatResponse:
        """Return the completion for a request, serving repeats from the cache."""
        key = CacheKey.from_request(request)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                _LOGGER.debug("Cache hit %s", key.digest[:12])
                self.stats.record(request.model, hit)
                return hit

        async with self._semaphore:
            response = await self._request(request)

        if self.cache is not None:
            self.cache.put(key, response)
        self.stats.record(request.model, response)
        return response

    async def _request(self, request: ChatRequest) -> ChatResponse:
        """POST with bounded retries and exponential backoff."""
        client = await self._ensure_http_client()
        body = request.to_wire()
        _LOGGER.debug(
            "HTTP POST %s %s",
            CHAT_COMPLETIONS_PATH,
            json.dumps(body, sort_keys=True, indent=2, ensure_ascii=False),
        )

        last_error: Exception | None = None
        for attempt in range(self.retry_budget):
            if attempt:
                delay = self.backoff_base * 2 ** (attempt - 1)
                _LOGGER.debug("Retrying in %.2fs (attempt %d/%d)", delay, attempt + 1, self.retry_budget)
                await self._sleep(delay)
            try:
                response = await client.post(CHAT_COMPLETIONS_PATH, json=body)
            except httpx.TimeoutException as exc:
                last_error = GatewayTimeout(f"Request timed out after {attempt + 1} attempt(s)")
                last_error.__cause__ = exc
                continue
            except httpx.TransportError as exc:
                last_error = EndpointError(0, str(exc))
                last_error.__cause__ = exc
                continue

            if response.status_code in RETRYABLE_STATUS:
                if response.status_code == 429:
                    last_error = RateLimited(f"Rate limited after {attempt + 1} attempt(s)")
                else:
                    last_error = EndpointError(response.status_code, response.text)
                continue
            if response.status_code >= 400:
                raise EndpointError(response.status_code, response.text)

            data = response.json()
            _LOGGER.debug(
                "HTTP POST %s response %s:\n%s",
                CHAT_COMPLETIONS_PATH,
                response.status_code,
                json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False),
            )
            return ChatCompletionResponse.model_validate(data).to_response()

        _LOGGER.error("Retry budget of %d exhausted for %s", self.retry_budget, request.model)
        assert last_error is not None
        raise last_error
