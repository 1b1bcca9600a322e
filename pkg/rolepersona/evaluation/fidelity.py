"""Personality fidelity and multi-turn consistency of a subject model on held-out characters."""

from __future__ import annotations

import asyncio
import logging
from typing import Sequence

from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from ..assessor import AssessmentResult, Assessor, Pooling, full_accuracy, single_accuracy
from ..characters import CharacterProfile, Registry, ground_truth_for
from ..errors import (
    EmptyResponse,
    InsufficientDimensions,
    InterviewFailed,
    NoGroundTruthCoverage,
)
from ..interview import InterviewEngine, InterviewRecord
from ..pyllm import LLMGatewayClient
from ..scale_bank import Scale, ScaleBank
from ..templates import PromptLibrary, default_library
from .consistency import ConsistencySummary, consistency, summarize

_LOGGER = logging.getLogger(__name__)


class FidelityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    subject_model: str
    single_accuracy: float
    full_accuracy: float
    pooling: Pooling
    coverage: float
    characters: tuple[str, ...]
    uncovered: tuple[str, ...] = ()
    failed_interviews: int = 0
    results: tuple[AssessmentResult, ...] = ()


async def _interview_scale(
    engine: InterviewEngine,
    character: CharacterProfile,
    scale: Scale,
) -> tuple[list[InterviewRecord], int]:
    scored = {d.code for d in scale.scored_dimensions}
    questions = [q for q in scale.questions if q.dimension_code in scored]
    outcomes = await asyncio.gather(
        *(engine.run_single_interview(character, q) for q in questions),
        return_exceptions=True,
    )
    records: list[InterviewRecord] = []
    failed = 0
    for question, outcome in zip(questions, outcomes):
        if isinstance(outcome, (InterviewFailed, EmptyResponse)):
            _LOGGER.error("%s", outcome)
            failed += 1
        elif isinstance(outcome, BaseException):
            raise outcome
        else:
            records.append(outcome)
    return records, failed


async def personality_fidelity_run(
    subject_model: str,
    test_characters: Sequence[CharacterProfile],
    bank: ScaleBank,
    gateway: LLMGatewayClient,
    *,
    registry: Registry,
    scales: Sequence[str] = ("16P",),
    judge: str = "judge",
    seed: int | None = None,
    pooling: Pooling | str = Pooling.POOLED,
    prompts: PromptLibrary | None = None,
    progress: bool = False,
) -> FidelityReport:
    """Interview each annotated test character on every question, assess, and score against truth."""
    prompts = prompts or default_library()
    engine = InterviewEngine(
        gateway, prompts=prompts, generator=subject_model, judge=judge, seed=seed, require_screening=False
    )
    assessor = Assessor(gateway, prompts=prompts, judge=judge, seed=seed)

    plan = [
        (character, bank.scale(scale_id), truth.label)
        for character in test_characters
        for scale_id in scales
        if (truth := ground_truth_for(registry, character.name, scale_id)) is not None
    ]
    covered = sorted({character.name for character, _, _ in plan})
    uncovered = sorted({c.name for c in test_characters} - set(covered))
    coverage = len(covered) / len(test_characters) if test_characters else 0.0
    if not plan:
        raise NoGroundTruthCoverage(
            f"None of {len(test_characters)} test character(s) has ground truth on {list(scales)}",
            {"covered": [], "uncovered": uncovered, "fraction": coverage},
        )
    for name in uncovered:
        _LOGGER.warning("No ground truth for %s on %s; skipped", name, list(scales))

    results: list[AssessmentResult] = []
    failed = 0
    for character, scale, truth in tqdm(plan, desc="fidelity", unit="scale", disable=not progress):
        records, scale_failed = await _interview_scale(engine, character, scale)
        failed += scale_failed
        results.append(await assessor.assess_character(character.name, scale, records, truth))

    return FidelityReport(
        subject_model=gateway.resolve_model(subject_model),
        single_accuracy=single_accuracy(results, pooling),
        full_accuracy=full_accuracy(results, pooling),
        pooling=Pooling(pooling),
        coverage=coverage,
        characters=tuple(covered),
        uncovered=tuple(uncovered),
        failed_interviews=failed,
        results=tuple(results),
    )


async def _round_scores(
    assessor: Assessor,
    character: CharacterProfile,
    scale: Scale,
    record: InterviewRecord,
) -> list[dict[str, float]] | None:
    rounds: list[dict[str, float]] = []
    for count in range(1, len(record.turns) + 1):
        turns = [(t.question_text, t.response_text) for t in record.turns[:count]]
        dimensions = scale.scored_dimensions
        scores = await asyncio.gather(
            *(assessor.judge_dialogue(character.name, scale, d, turns) for d in dimensions)
        )
        if any(score is None for score in scores):
            return None
        rounds.append({d.code: score for d, score in zip(dimensions, scores)})
    return rounds


async def consistency_run(
    subject_model: str,
    test_characters: Sequence[CharacterProfile],
    scale: Scale,
    gateway: LLMGatewayClient,
    *,
    judge: str = "judge",
    seed: int = 0,
    sample: bool = False,
    prompts: PromptLibrary | None = None,
    progress: bool = False,
) -> ConsistencySummary:
    """Five-round interview per character; every dimension is re-judged after each round."""
    prompts = prompts or default_library()
    engine = InterviewEngine(
        gateway, prompts=prompts, generator=subject_model, judge=judge, seed=seed, require_screening=False
    )
    assessor = Assessor(gateway, prompts=prompts, judge=judge, seed=seed)

    reports = []
    skipped: list[str] = []
    for character in tqdm(test_characters, desc=f"consistency {scale.id}", unit="char", disable=not progress):
        try:
            record = await engine.run_multi_interview(character, scale, seed)
        except (InsufficientDimensions, InterviewFailed, EmptyResponse) as exc:
            _LOGGER.error("Consistency of %s on %s skipped: %s", character.name, scale.id, exc)
            skipped.append(character.name)
            continue
        rounds = await _round_scores(assessor, character, scale, record)
        if rounds is None:
            _LOGGER.error("Consistency of %s on %s skipped: a round failed to judge", character.name, scale.id)
            skipped.append(character.name)
            continue
        reports.append(consistency(rounds, scale.id, sample=sample, character=character.name))

    return summarize(scale.id, reports, skipped)
