"""Motivation-recognition multiple-choice accuracy."""

from __future__ import annotations

import asyncio
import logging
from pathlib import Path
from typing import Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from ..const import JUDGE_TEMPERATURE
from ..documents import DocumentModel, read_json, validate_document
from ..errors import EmptyInput, McqSchemaError
from ..pyllm import ChatMessage, LLMGatewayClient, LLMGatewayError
from ..templates import MCQ, PromptLibrary, default_library
from .parsing import parse_option_letter

_LOGGER = logging.getLogger(__name__)


class McqOption(DocumentModel):
    letter: str
    text: str


class McqItem(DocumentModel):
    id: str
    scenario: str
    options: tuple[McqOption, ...]
    correct: str

    @model_validator(mode="after")
    def _check_options(self) -> "McqItem":
        letters = [option.letter for option in self.options]
        if len(letters) < 2:
            raise ValueError(f"item {self.id} needs at least two options")
        if len(set(letters)) != len(letters):
            raise ValueError(f"item {self.id} repeats option letters {letters}")
        if self.correct not in letters:
            raise ValueError(f"item {self.id}: correct letter {self.correct!r} is not among {letters}")
        return self

    @property
    def letters(self) -> list[str]:
        return [option.letter for option in self.options]

    def rendered_options(self) -> str:
        return "\n".join(f"{option.letter}. {option.text}" for option in self.options)


class McqOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    item_id: str
    answer: str | None
    correct: bool
    error: str | None = None


class McqReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: str
    accuracy: float
    n_items: int
    n_correct: int
    n_unparsed: int
    outcomes: tuple[McqOutcome, ...]


def load_mcq(path: str | Path) -> list[McqItem]:
    items = validate_document(list[McqItem], read_json(path, McqSchemaError), McqSchemaError)
    ids = [item.id for item in items]
    if len(set(ids)) != len(ids):
        raise McqSchemaError("duplicate item ids", "")
    return items


async def _answer(
    model: str,
    item: McqItem,
    gateway: LLMGatewayClient,
    prompts: PromptLibrary,
    seed: int | None,
) -> McqOutcome:
    prompt = prompts.render(MCQ, scenario=item.scenario, options=item.rendered_options())
    try:
        reply = await gateway.complete(
            model,
            [ChatMessage(role="user", content=prompt)],
            temperature=JUDGE_TEMPERATURE,
            seed=seed,
        )
    except LLMGatewayError as exc:
        _LOGGER.warning("MCQ item %s failed: %s", item.id, exc)
        return McqOutcome(item_id=item.id, answer=None, correct=False, error=str(exc))

    answer = parse_option_letter(reply.content, item.letters)
    if answer is None:
        _LOGGER.warning("No option letter in the reply to %s; counted incorrect", item.id)
    return McqOutcome(item_id=item.id, answer=answer, correct=answer == item.correct)


async def run_mcq(
    model: str,
    items: Sequence[McqItem],
    gateway: LLMGatewayClient,
    *,
    prompts: PromptLibrary | None = None,
    seed: int | None = None,
) -> McqReport:
    if not items:
        raise EmptyInput("No multiple-choice items")
    prompts = prompts or default_library()
    outcomes = await asyncio.gather(*(_answer(model, item, gateway, prompts, seed) for item in items))
    n_correct = sum(outcome.correct for outcome in outcomes)
    return McqReport(
        model=gateway.resolve_model(model),
        accuracy=n_correct / len(outcomes),
        n_items=len(outcomes),
        n_correct=n_correct,
        n_unparsed=sum(outcome.answer is None for outcome in outcomes),
        outcomes=tuple(outcomes),
    )


async def mr_accuracy(
    model: str,
    mcq_set: Sequence[McqItem],
    gateway: LLMGatewayClient,
    **kwargs,
) -> float:
    """Correct answers over all items; unreadable replies count as wrong."""
    report = await run_mcq(model, mcq_set, gateway, **kwargs)
    return report.accuracy
