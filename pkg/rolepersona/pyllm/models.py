"""Lightweight models used by the chat-completions client."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .payloads import ChatRequest, ChatResponse


@dataclass(frozen=True)
class CacheKey:
    """Content address of a chat request."""

    digest: str

    @classmethod
    def from_request(cls, request: ChatRequest) -> "CacheKey":
        """Hash the canonical JSON form of every request field."""
        canonical = json.dumps(
            request.to_wire() | {"seed": request.seed},
            sort_keys=True,
            ensure_ascii=False,
            separators=(",", ":"),
        )
        return cls(hashlib.sha256(canonical.encode("utf-8")).hexdigest())

    def __str__(self) -> str:
        return self.digest


@dataclass
class ModelUsage:
    calls: int = 0
    cache_hits: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass
class GatewayStats:
    """Call, cache and token tallies per model, shared by every gateway handle."""

    per_model: dict[str, ModelUsage] = field(default_factory=dict)

    def record(self, model: str, response: ChatResponse) -> None:
        usage = self.per_model.setdefault(model, ModelUsage())
        if response.cached:
            usage.cache_hits += 1
            return
        usage.calls += 1
        usage.prompt_tokens += response.usage.prompt_tokens
        usage.completion_tokens += response.usage.completion_tokens

    @property
    def network_calls(self) -> int:
        return sum(usage.calls for usage in self.per_model.values())

    @property
    def cache_hits(self) -> int:
        return sum(usage.cache_hits for usage in self.per_model.values())

    def cost(self, prices: dict[str, dict[str, float]]) -> float:
        """Cost in currency units given per-1k-token prices keyed by model."""
        total = 0.0
        for model, usage in self.per_model.items():
            price = prices.get(model)
            if not price:
                continue
            total += usage.prompt_tokens / 1000 * price.get("prompt", 0.0)
            total += usage.completion_tokens / 1000 * price.get("completion", 0.0)
        return total

    def as_dict(self, prices: dict[str, dict[str, float]] | None = None) -> dict:
        return {
            "network_calls": self.network_calls,
            "cache_hits": self.cache_hits,
            "cost": round(self.cost(prices or {}), 6),
            "per_model": {
                model: vars(usage) for model, usage in sorted(self.per_model.items())
            },
        }
