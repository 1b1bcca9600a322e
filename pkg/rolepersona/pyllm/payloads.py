"""Typed payloads for chat-completions requests and responses."""

from __future__ import annotations

import logging
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator

_LOGGER = logging.getLogger(__name__)

Role = Literal["system", "user", "assistant"]
FinishReason = Literal["stop", "length", "error"]


class WireBaseModel(BaseModel):
    """Base model that preserves unknown fields."""

    model_config = ConfigDict(extra="allow", populate_by_name=True)

    def model_post_init(self, __context: Any) -> None:
        extras = getattr(self, "__pydantic_extra__", None) or {}
        if extras:
            _LOGGER.debug(
                "Unexpected keys for %s: %s",
                self.__class__.__name__,
                sorted(extras.keys()),
            )


class ChatMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    role: Role
    content: str


class ChatRequest(BaseModel):
    """One chat-completion call; immutable so it can be hashed into a cache key."""

    model_config = ConfigDict(frozen=True)

    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = Field(default=0.0, ge=0.0, le=2.0)
    max_tokens: PositiveInt = 512
    seed: int | None = None

    @model_validator(mode="after")
    def _check_messages(self) -> "ChatRequest":
        if not self.messages:
            raise ValueError("messages must not be empty")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must come from system or user")
        return self

    def to_wire(self) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [message.model_dump() for message in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            body["seed"] = self.seed
        return body


class Usage(WireBaseModel):
    prompt_tokens: int = 0
    completion_tokens: int = 0
    total_tokens: int | None = None


class ChatResponse(BaseModel):
    content: str
    finish_reason: FinishReason = "stop"
    usage: Usage = Field(default_factory=Usage)
    cached: bool = False

    @model_validator(mode="after")
    def _check_content(self) -> "ChatResponse":
        if self.finish_reason == "stop" and not self.content.strip():
            raise ValueError("content must be non-empty when finish_reason is stop")
        return self


class CompletionMessage(WireBaseModel):
    role: str | None = None
    content: str | None = None


class CompletionChoice(WireBaseModel):
    index: int | None = None
    message: CompletionMessage | None = None
    finish_reason: str | None = None
    logprobs: Any = None


class ChatCompletionResponse(WireBaseModel):
    """The subset of the OpenAI chat-completions body the gateway reads."""

    id: str | None = None
    object: str | None = None
    created: int | None = None
    model: str | None = None
    system_fingerprint: str | None = None
    choices: list[CompletionChoice] = Field(default_factory=list)
    usage: Usage | None = None

    def to_response(self) -> ChatResponse:
        choice = self.choices[0] if self.choices else None
        content = ""
        if choice and choice.message and choice.message.content:
            content = choice.message.content
        finish = (choice.finish_reason if choice else None) or "error"
        if finish not in ("stop", "length"):
            finish = "error"
        if finish == "stop" and not content.strip():
            _LOGGER.warning("Endpoint returned a blank completion with finish_reason stop")
            finish = "error"
        return ChatResponse(
            content=content,
            finish_reason=finish,
            usage=self.usage or Usage(),
        )
