"""Python helper for OpenAI-compatible chat-completion endpoints."""

from .cache import ResponseCache
from .client import LLMGatewayClient
from .const import BASE_URL, DEFAULT_API_KEY_ENV, DEFAULT_HEADERS, MOCK_BASE_URL, USER_AGENT
from .errors import (
    EndpointError,
    GatewayTimeout,
    InvalidRequest,
    LLMGatewayError,
    MockScriptExhausted,
    RateLimited,
)
from .mock import MockEntry, ScriptedTransport, load_mock_script
from .models import CacheKey, GatewayStats
from .payloads import ChatMessage, ChatRequest, ChatResponse, Usage

__all__ = [
    "BASE_URL",
    "CacheKey",
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "DEFAULT_API_KEY_ENV",
    "DEFAULT_HEADERS",
    "EndpointError",
    "GatewayStats",
    "GatewayTimeout",
    "InvalidRequest",
    "LLMGatewayClient",
    "LLMGatewayError",
    "MOCK_BASE_URL",
    "MockEntry",
    "MockScriptExhausted",
    "RateLimited",
    "ResponseCache",
    "ScriptedTransport",
    "USER_AGENT",
    "Usage",
    "load_mock_script",
]
