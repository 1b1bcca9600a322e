"""Role-specific question items shared by Rouge-L, win-rate and dimensional scoring."""

from __future__ import annotations

import asyncio
import logging
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from ..characters import Registry
from ..const import GENERATION_TEMPERATURE
from ..documents import DocumentModel, read_json, validate_document
from ..errors import SchemaViolation
from ..interview import InterviewEngine
from ..pyllm import LLMGatewayClient
from ..templates import PromptLibrary, default_library

_LOGGER = logging.getLogger(__name__)


class RolePlayItem(DocumentModel):
    id: str
    character: str
    question: str
    reference_answer: str
    candidate_answer: str | None = None


def load_roleplay_items(path: str | Path, registry: Registry | None = None) -> list[RolePlayItem]:
    items = validate_document(list[RolePlayItem], read_json(path))
    ids = [item.id for item in items]
    if len(set(ids)) != len(ids):
        raise SchemaViolation("duplicate item ids", "")
    if registry is not None:
        for index, item in enumerate(items):
            if item.character not in registry.characters:
                raise SchemaViolation(f"unknown character {item.character!r}", f"/{index}/character")
    return items


async def fill_candidates(
    items: Sequence[RolePlayItem],
    registry: Registry,
    gateway: LLMGatewayClient,
    *,
    subject: str = "subject",
    seed: int | None = None,
    prompts: PromptLibrary | None = None,
) -> list[RolePlayItem]:
    """Items with every missing candidate answer generated in character by the subject model."""
    prompts = prompts or default_library()
    engine = InterviewEngine(gateway, prompts=prompts, generator=subject, seed=seed, require_screening=False)

    async def answer(item: RolePlayItem) -> RolePlayItem:
        if item.candidate_answer is not None:
            return item
        spec = engine.prompt_spec(registry.profile(item.character), item.question)
        reply = await gateway.complete(
            subject,
            spec.messages(item.question, prompts),
            temperature=GENERATION_TEMPERATURE,
            seed=seed,
        )
        _LOGGER.debug("Generated candidate for %s", item.id)
        return item.model_copy(update={"candidate_answer": reply.content})

    return list(await asyncio.gather(*(answer(item) for item in items)))


def transcripts_by_character(items: Sequence[RolePlayItem]) -> dict[str, list[tuple[str, str]]]:
    """(question, candidate answer) pairs grouped per character, in item order."""
    grouped: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for item in items:
        if item.candidate_answer is None:
            raise ValueError(f"item {item.id} has no candidate answer")
        grouped[item.character].append((item.question, item.candidate_answer))
    return dict(grouped)
