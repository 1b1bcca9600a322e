"""Five-criterion judging of role-play transcripts."""

from __future__ import annotations

import asyncio
import logging
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..characters import CharacterProfile
from ..const import DIMENSIONAL_CRITERIA, JUDGE_HIGH, JUDGE_LOW, JUDGE_TEMPERATURE
from ..errors import EmptyInput, ScoreParseError
from ..pyllm import ChatMessage, LLMGatewayClient, LLMGatewayError
from ..templates import PromptLibrary, default_library, dimensional_template
from .parsing import parse_score

_LOGGER = logging.getLogger(__name__)


class DimensionalScore(BaseModel):
    """Per-criterion judge scores for one character; None marks a criterion that failed to parse."""

    model_config = ConfigDict(frozen=True)

    character: str
    memorization: float | None = None
    personality: float | None = None
    values: float | None = None
    stability: float | None = None
    hallucination: float | None = None
    transcript_ref: str = ""

    @model_validator(mode="after")
    def _check_range(self) -> "DimensionalScore":
        for criterion in DIMENSIONAL_CRITERIA:
            score = getattr(self, criterion)
            if score is not None and not JUDGE_LOW <= score <= JUDGE_HIGH:
                raise ValueError(f"{criterion} score {score} outside {JUDGE_LOW}-{JUDGE_HIGH}")
        return self

    @property
    def missing(self) -> list[str]:
        return [criterion for criterion in DIMENSIONAL_CRITERIA if getattr(self, criterion) is None]

    def scores(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in DIMENSIONAL_CRITERIA if getattr(self, c) is not None}


def render_interactions(turns: Iterable[tuple[str, str]], name: str) -> str:
    return "\n\n".join(f"User: {question}\n{name}: {answer}" for question, answer in turns)


async def _judge_criterion(
    criterion: str,
    character: CharacterProfile,
    interactions: str,
    gateway: LLMGatewayClient,
    judge: str,
    seed: int | None,
    prompts: PromptLibrary,
) -> float | None:
    prompt = prompts.format(
        dimensional_template(criterion),
        agent_name=character.name,
        agent_context=character.description,
        interactions=interactions,
    )
    try:
        reply = await gateway.complete(
            judge,
            [ChatMessage(role="user", content=prompt)],
            temperature=JUDGE_TEMPERATURE,
            seed=seed,
        )
        return float(parse_score(reply.content))
    except (ScoreParseError, LLMGatewayError) as exc:
        _LOGGER.warning("%s of %s recorded as missing: %s", criterion, character.name, exc)
        return None


async def dimensional_scores(
    character: CharacterProfile,
    transcript: Sequence[tuple[str, str]],
    judge_gateway: LLMGatewayClient,
    *,
    judge: str = "judge",
    seed: int | None = None,
    prompts: PromptLibrary | None = None,
    transcript_ref: str = "",
) -> DimensionalScore:
    """Judge each criterion independently over the same transcript."""
    prompts = prompts or default_library()
    interactions = render_interactions(transcript, character.name)
    scores = await asyncio.gather(
        *(
            _judge_criterion(c, character, interactions, judge_gateway, judge, seed, prompts)
            for c in DIMENSIONAL_CRITERIA
        )
    )
    return DimensionalScore(
        character=character.name,
        transcript_ref=transcript_ref,
        **dict(zip(DIMENSIONAL_CRITERIA, scores)),
    )


def average_dimensional(scores: Sequence[DimensionalScore]) -> dict[str, float | None]:
    """Mean per criterion over characters, skipping missing entries."""
    if not scores:
        raise EmptyInput("No dimensional scores to average")
    averages: dict[str, float | None] = {}
    for criterion in DIMENSIONAL_CRITERIA:
        present = [getattr(s, criterion) for s in scores if getattr(s, criterion) is not None]
        averages[criterion] = float(np.mean(present)) if present else None
    return averages
