"""Content-addressed on-disk cache of chat responses."""

from __future__ import annotations

import hashlib
import logging
import os
from typing import Any

import diskcache

from .models import CacheKey
from .payloads import ChatResponse

_LOGGER = logging.getLogger(__name__)


def _content_digest(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8")).hexdigest()


class ResponseCache:
    """Disk-backed response store; the first writer of a key wins."""

    def __init__(self, cache_dir: str | os.PathLike[str]) -> None:
        os.makedirs(cache_dir, exist_ok=True)
        self.cache = diskcache.Cache(os.fspath(cache_dir))

    def get(self, key: CacheKey) -> ChatResponse | None:
        """Return the stored response with cached=True, or None on a miss."""
        entry: dict[str, Any] | None = self.cache.get(key.digest)
        if entry is None:
            return None
        response = ChatResponse.model_validate(entry["response"])
        if _content_digest(response.content) != entry.get("content_digest"):
            _LOGGER.warning("Cache entry %s failed its digest check; ignoring", key)
            return None
        return response.model_copy(update={"cached": True})

    def put(self, key: CacheKey, response: ChatResponse) -> bool:
        """Store a completed response; returns False when the key already existed."""
        if response.finish_reason != "stop" or not response.content.strip():
            return False
        entry = {
            "response": response.model_copy(update={"cached": False}).model_dump(),
            "content_digest": _content_digest(response.content),
        }
        return bool(self.cache.add(key.digest, entry))

    def __contains__(self, key: CacheKey) -> bool:
        return key.digest in self.cache

    def __len__(self) -> int:
        return len(self.cache)

    def close(self) -> None:
        self.cache.close()
