"""Judge-derived personality assessment, ground-truth comparison and response filtering."""

from __future__ import annotations

import asyncio
import json
import logging
from collections import defaultdict
from enum import StrEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from .const import JUDGE_HIGH, JUDGE_LOW, JUDGE_TEMPERATURE
from .errors import EmptyInput, JudgeFailure, JudgeParseError, MissingDimension
from .evaluation.parsing import parse_score
from .interview import InterviewRecord
from .pyllm import ChatMessage, LLMGatewayClient, LLMGatewayError
from .scale_bank import Dimension, Label, Level, Question, Scale, render_label, truth_levels
from .templates import ASSESS_DIALOGUE, ASSESS_ITEM, PromptLibrary, default_library, render_history

_LOGGER = logging.getLogger(__name__)


class FilterReason(StrEnum):
    MATCH = "Match"
    MISMATCH = "Mismatch"
    NO_GROUND_TRUTH = "NoGroundTruth"
    JUDGE_FAILURE = "JudgeFailure"


class FilterPolicy(StrEnum):
    PER_DIMENSION = "per_dimension"
    STRICT = "strict"


class Pooling(StrEnum):
    POOLED = "pooled"
    PER_CHARACTER = "per_character"


class DimensionScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    character: str
    scale_id: str
    dimension_code: str
    raw_score: float
    level: Level
    n_items: int

    @model_validator(mode="after")
    def _check_items(self) -> "DimensionScore":
        if self.n_items < 1:
            raise ValueError("a dimension score needs at least one judged item")
        return self


class AssessmentResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    character: str
    scale_id: str
    dimension_scores: tuple[DimensionScore, ...] = ()
    predicted_label: Label | None = None
    truth_label: Label | None = None
    per_dimension_match: dict[str, bool] = {}
    full_match: bool = False
    judge_failures: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_full_match(self) -> "AssessmentResult":
        expected = bool(self.per_dimension_match) and all(self.per_dimension_match.values())
        if self.full_match != expected:
            raise ValueError("full_match must equal the conjunction of per-dimension matches")
        return self

    @property
    def has_truth(self) -> bool:
        return self.truth_label is not None

    @property
    def matched(self) -> int:
        return sum(self.per_dimension_match.values())

    @property
    def annotated(self) -> int:
        return len(self.per_dimension_match)


class FilterOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    record_id: str
    character: str
    scale_id: str
    kept: bool
    reason: FilterReason

    @model_validator(mode="after")
    def _check_reason(self) -> "FilterOutcome":
        if not self.kept and self.reason not in (FilterReason.MISMATCH, FilterReason.JUDGE_FAILURE):
            raise ValueError(f"discarded records need a Mismatch or JudgeFailure reason, got {self.reason}")
        return self


def reflect(score: float, low: int = JUDGE_LOW, high: int = JUDGE_HIGH) -> float:
    """Mirror a per-item score about the middle of the judge range."""
    return low + high - score


def classify(scores: Sequence[DimensionScore], scale: Scale) -> Label:
    """Assemble the scale's label from one score per scored dimension."""
    levels = {score.dimension_code: score.level for score in scores}
    missing = [d.code for d in scale.scored_dimensions if d.code not in levels]
    if missing:
        raise MissingDimension(f"{scale.id} lacks scores for {missing}")
    return render_label(scale, levels)


def compare_levels(
    scale: Scale,
    scores: Sequence[DimensionScore],
    truth: Label | None,
) -> dict[str, bool]:
    """Per annotated dimension, whether the assessed level equals the truth; unjudged is a miss."""
    if truth is None:
        return {}
    predicted = {score.dimension_code: score.level for score in scores}
    expected = truth_levels(scale, truth)
    return {
        d.code: predicted.get(d.code) == expected[d.code]
        for d in scale.scored_dimensions
        if d.code in expected
    }


def _pooled_or_per_character(
    results: Iterable[AssessmentResult],
    numerator,
    denominator,
    pooling: Pooling | str,
) -> float:
    annotated = [r for r in results if r.has_truth and denominator(r)]
    if not annotated:
        raise EmptyInput("No assessment carries ground truth")
    if Pooling(pooling) is Pooling.POOLED:
        return sum(numerator(r) for r in annotated) / sum(denominator(r) for r in annotated)

    by_character: dict[str, list[AssessmentResult]] = defaultdict(list)
    for result in annotated:
        by_character[result.character].append(result)
    per_character = [
        sum(numerator(r) for r in group) / sum(denominator(r) for r in group)
        for group in by_character.values()
    ]
    return float(np.mean(per_character))


def single_accuracy(results: Iterable[AssessmentResult], pooling: Pooling | str = Pooling.POOLED) -> float:
    """Share of matching dimensions over every annotated dimension."""
    return _pooled_or_per_character(results, lambda r: r.matched, lambda r: r.annotated, pooling)


def full_accuracy(results: Iterable[AssessmentResult], pooling: Pooling | str = Pooling.POOLED) -> float:
    """Share of results whose whole label matches."""
    return _pooled_or_per_character(results, lambda r: int(r.full_match), lambda r: 1, pooling)


def filter_records(
    records: Iterable[InterviewRecord],
    assessments: Iterable[AssessmentResult],
    policy: FilterPolicy | str = FilterPolicy.PER_DIMENSION,
) -> list[FilterOutcome]:
    """Keep or discard each record against its character's assessment on the same scale."""
    policy = FilterPolicy(policy)
    by_key = {(a.character, a.scale_id): a for a in assessments}
    outcomes: list[FilterOutcome] = []
    for record in records:
        assessment = by_key.get((record.character, record.scale_id))
        relevant = []
        if assessment is not None and assessment.has_truth:
            relevant = [code for code in record.dimension_codes if code in assessment.per_dimension_match]

        if not relevant:
            _LOGGER.debug("No ground truth for %s on %s; keeping", record.character, record.scale_id)
            reason, kept = FilterReason.NO_GROUND_TRUTH, True
        elif any(code in assessment.judge_failures for code in relevant):
            reason, kept = FilterReason.JUDGE_FAILURE, False
        elif policy is FilterPolicy.STRICT:
            kept = assessment.full_match
            reason = FilterReason.MATCH if kept else FilterReason.MISMATCH
        else:
            kept = all(assessment.per_dimension_match[code] for code in relevant)
            reason = FilterReason.MATCH if kept else FilterReason.MISMATCH

        outcomes.append(
            FilterOutcome(
                record_id=record.record_id,
                character=record.character,
                scale_id=record.scale_id,
                kept=kept,
                reason=reason,
            )
        )
    return outcomes


class Assessor:
    """Scores interview responses with a judge model."""

    def __init__(
        self,
        gateway: LLMGatewayClient,
        *,
        prompts: PromptLibrary | None = None,
        judge: str = "judge",
        seed: int | None = None,
    ) -> None:
        self.gateway = gateway
        self.prompts = prompts or default_library()
        self.judge = judge
        self.seed = seed

    async def _judge_item(
        self,
        character: str,
        scale: Scale,
        dimension: Dimension,
        question: Question,
        response: str,
    ) -> float | None:
        prompt = self.prompts.render(
            ASSESS_ITEM,
            name=character,
            scale_name=scale.name,
            dimension_name=dimension.name,
            dimension_description=dimension.description,
            question=question.text,
            response=response,
        )
        try:
            reply = await self.gateway.complete(
                self.judge,
                [ChatMessage(role="user", content=prompt)],
                temperature=JUDGE_TEMPERATURE,
                seed=self.seed,
            )
            score = parse_score(reply.content)
        except (JudgeParseError, LLMGatewayError) as exc:
            _LOGGER.warning("Judging %s on %s failed: %s", character, question.id, exc)
            return None
        return reflect(score) if question.reverse_scored else float(score)

    async def judge_dimension(
        self,
        character: str,
        scale: Scale,
        dimension: Dimension,
        responses: Sequence[tuple[Question, str]],
    ) -> DimensionScore:
        """Mean judged score over a dimension's responses; reverse-scored items are reflected first."""
        scores = await asyncio.gather(
            *(self._judge_item(character, scale, dimension, q, r) for q, r in responses)
        )
        judged = [score for score in scores if score is not None]
        if not judged:
            raise JudgeFailure(f"Every item of {scale.id}/{dimension.code} failed to judge for {character}")
        raw = float(np.mean(judged))
        return DimensionScore(
            character=character,
            scale_id=scale.id,
            dimension_code=dimension.code,
            raw_score=raw,
            level=scale.level_for(dimension.code, raw),
            n_items=len(judged),
        )

    async def judge_dialogue(
        self,
        character: str,
        scale: Scale,
        dimension: Dimension,
        turns: Sequence[tuple[str, str]],
    ) -> float | None:
        """One judged score for a dimension from a whole conversation; None when unreadable."""
        prompt = self.prompts.render(
            ASSESS_DIALOGUE,
            name=character,
            scale_name=scale.name,
            dimension_name=dimension.name,
            dimension_description=dimension.description,
            dialogue=render_history(turns, character),
        )
        try:
            reply = await self.gateway.complete(
                self.judge,
                [ChatMessage(role="user", content=prompt)],
                temperature=JUDGE_TEMPERATURE,
                seed=self.seed,
            )
            return float(parse_score(reply.content))
        except (JudgeParseError, LLMGatewayError) as exc:
            _LOGGER.warning("Judging %s of %s over %d turn(s) failed: %s", dimension.code, character, len(turns), exc)
            return None

    async def assess_character(
        self,
        character: str,
        scale: Scale,
        records: Iterable[InterviewRecord],
        truth: Label | None,
    ) -> AssessmentResult:
        """Judge every scored dimension the character's responses touch and compare with truth."""
        grouped: dict[str, list[tuple[Question, str]]] = defaultdict(list)
        questions = {q.id: q for q in scale.questions}
        for record in records:
            if record.character != character or record.scale_id != scale.id:
                continue
            for turn in record.turns:
                grouped[turn.dimension_code].append((questions[turn.question_id], turn.response_text))

        dimensions = [d for d in scale.scored_dimensions if grouped.get(d.code)]
        outcomes = await asyncio.gather(
            *(self.judge_dimension(character, scale, d, grouped[d.code]) for d in dimensions),
            return_exceptions=True,
        )
        scores: list[DimensionScore] = []
        failures: list[str] = []
        for dimension, outcome in zip(dimensions, outcomes):
            if isinstance(outcome, JudgeFailure):
                _LOGGER.warning("%s", outcome)
                failures.append(dimension.code)
            elif isinstance(outcome, BaseException):
                raise outcome
            else:
                scores.append(outcome)

        try:
            predicted = classify(scores, scale)
        except MissingDimension:
            predicted = None

        matches = compare_levels(scale, scores, truth)
        return AssessmentResult(
            character=character,
            scale_id=scale.id,
            dimension_scores=tuple(scores),
            predicted_label=predicted,
            truth_label=truth,
            per_dimension_match=matches,
            full_match=bool(matches) and all(matches.values()),
            judge_failures=tuple(failures),
        )


def write_assessment_report(results: Iterable[AssessmentResult], path: str | Path) -> None:
    """JSON list of assessments, one object per (character, scale)."""
    payload = [result.model_dump(mode="json") for result in results]
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")


def assessment_frame(results: Iterable[AssessmentResult]) -> pd.DataFrame:
    rows = [
        {
            "character": r.character,
            "scale": r.scale_id,
            "matched_dimensions": r.matched,
            "annotated_dimensions": r.annotated,
            "single_acc_contribution": r.matched / r.annotated if r.annotated else None,
            "full_match": r.full_match if r.has_truth else None,
        }
        for r in results
    ]
    columns = [
        "character",
        "scale",
        "matched_dimensions",
        "annotated_dimensions",
        "single_acc_contribution",
        "full_match",
    ]
    return pd.DataFrame(rows, columns=columns)


def write_assessment_csv(results: Iterable[AssessmentResult], path: str | Path) -> None:
    assessment_frame(results).to_csv(path, index=False)
