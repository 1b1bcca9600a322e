"""Psychological scale question banks: loading, validation and subsetting."""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from enum import StrEnum
from pathlib import Path
from typing import Any, Literal, Mapping

from pydantic import Field

from .const import JUDGE_MIDPOINT, LEVEL_HIGH, LEVEL_LOW, QUADRANT_LABELS
from .documents import DocumentModel, read_json, validate_document
from .errors import CountMismatch, EmptyPartSubset, SchemaViolation, UnknownScale

_LOGGER = logging.getLogger(__name__)

Level = Literal["High", "Low"]
Label = str | dict[str, str]


class LabelKind(StrEnum):
    PER_DIMENSION_LEVEL = "per_dimension_level"
    CATEGORICAL_TYPE = "categorical_type"
    QUADRANT = "quadrant"


class SelectionMode(StrEnum):
    FULL = "Full"
    PART = "Part"


class Dimension(DocumentModel):
    scale_id: str = ""
    code: str
    name: str
    description: str = ""
    high_pole: str | None = None
    low_pole: str | None = None
    suffix: bool = False
    threshold: float | None = None
    filler: bool = False


class Question(DocumentModel):
    id: str
    scale_id: str = ""
    dimension_code: str = Field(alias="dimension")
    text: str
    reverse_scored: bool = False
    language_tag: str = Field(default="en", alias="language")


class Scale(DocumentModel):
    id: str
    name: str
    label_kind: LabelKind = LabelKind.PER_DIMENSION_LEVEL
    declared_count: int
    midpoint: float = JUDGE_MIDPOINT
    dimensions: tuple[Dimension, ...] = ()
    questions: tuple[Question, ...] = ()
    quadrant_labels: dict[str, str] = Field(default_factory=lambda: dict(QUADRANT_LABELS))

    def dimension(self, code: str) -> Dimension:
        for dimension in self.dimensions:
            if dimension.code == code:
                return dimension
        raise KeyError(code)

    @property
    def scored_dimensions(self) -> tuple[Dimension, ...]:
        return tuple(d for d in self.dimensions if not d.filler)

    def threshold_for(self, code: str) -> float:
        dimension = self.dimension(code)
        return dimension.threshold if dimension.threshold is not None else self.midpoint

    def level_for(self, code: str, raw_score: float) -> Level:
        """High iff the score reaches the dimension threshold; ties are High."""
        return LEVEL_HIGH if raw_score >= self.threshold_for(code) else LEVEL_LOW


class ScaleBank(DocumentModel):
    scales: dict[str, Scale] = Field(default_factory=dict)
    part_subset: tuple[str, ...] = ()

    def scale(self, scale_id: str) -> Scale:
        try:
            return self.scales[scale_id]
        except KeyError:
            raise UnknownScale(scale_id) from None

    def question(self, scale_id: str, question_id: str) -> Question:
        for question in self.scale(scale_id).questions:
            if question.id == question_id:
                return question
        raise KeyError(f"{scale_id}/{question_id}")


class _BankFile(DocumentModel):
    scales: list[Scale] = Field(default_factory=list)
    part_subset: list[str] = Field(default_factory=list)


def natural_key(value: str) -> tuple:
    return tuple(int(part) if part.isdigit() else part for part in re.split(r"(\d+)", value))


def _validate_scale(index: int, scale: Scale) -> Scale:
    pointer = f"/scales/{index}"
    codes = [dimension.code for dimension in scale.dimensions]
    duplicated = [code for code, count in Counter(codes).items() if count > 1]
    if duplicated:
        raise SchemaViolation(f"duplicate dimension code {duplicated[0]!r}", f"{pointer}/dimensions")

    seen: set[str] = set()
    for q_index, question in enumerate(scale.questions):
        q_pointer = f"{pointer}/questions/{q_index}"
        if not question.text.strip():
            raise SchemaViolation("question text is empty", f"{q_pointer}/text")
        if question.dimension_code not in codes:
            raise SchemaViolation(
                f"unknown dimension {question.dimension_code!r}", f"{q_pointer}/dimension"
            )
        if question.id in seen:
            raise SchemaViolation(f"duplicate question id {question.id!r}", f"{q_pointer}/id")
        seen.add(question.id)

    if scale.label_kind is LabelKind.CATEGORICAL_TYPE:
        for d_index, dimension in enumerate(scale.scored_dimensions):
            if not dimension.high_pole or not dimension.low_pole:
                raise SchemaViolation(
                    "categorical dimensions need high_pole and low_pole",
                    f"{pointer}/dimensions/{d_index}",
                )
    if scale.label_kind is LabelKind.QUADRANT and len(scale.scored_dimensions) < 2:
        raise SchemaViolation("quadrant scales need two scored dimensions", f"{pointer}/dimensions")

    if scale.declared_count != len(scale.questions):
        raise CountMismatch(
            f"{scale.id} declares {scale.declared_count} questions but contains {len(scale.questions)}",
            f"{pointer}/declared_count",
        )

    return scale.model_copy(
        update={
            "dimensions": tuple(d.model_copy(update={"scale_id": scale.id}) for d in scale.dimensions),
            "questions": tuple(q.model_copy(update={"scale_id": scale.id}) for q in scale.questions),
        }
    )


def parse_scale_bank(data: Any) -> ScaleBank:
    """Validate an already-decoded bank document."""
    document = validate_document(_BankFile, data)
    scales: dict[str, Scale] = {}
    for index, scale in enumerate(document.scales):
        if scale.id in scales:
            raise SchemaViolation(f"duplicate scale id {scale.id!r}", f"/scales/{index}/id")
        scales[scale.id] = _validate_scale(index, scale)

    for index, scale_id in enumerate(document.part_subset):
        if scale_id not in scales:
            raise SchemaViolation(f"part_subset names unknown scale {scale_id!r}", f"/part_subset/{index}")

    if not scales:
        _LOGGER.warning("Scale bank contains no scales")
    return ScaleBank(scales=scales, part_subset=tuple(document.part_subset))


def load_scale_bank(path: str | Path) -> ScaleBank:
    """Load and validate a bank file."""
    bank = parse_scale_bank(read_json(path))
    _LOGGER.debug(
        "Loaded %d scales from %s: %s",
        len(bank.scales),
        path,
        {scale_id: len(scale.questions) for scale_id, scale in bank.scales.items()},
    )
    return bank


def bank_document(bank: ScaleBank) -> dict[str, Any]:
    """Render a bank in the file schema."""
    scales = []
    for scale in bank.scales.values():
        document = scale.model_dump(by_alias=True, mode="json", exclude={"dimensions", "questions"})
        document["dimensions"] = [
            d.model_dump(by_alias=True, mode="json", exclude={"scale_id"}) for d in scale.dimensions
        ]
        document["questions"] = [
            q.model_dump(by_alias=True, mode="json", exclude={"scale_id"}) for q in scale.questions
        ]
        scales.append(document)
    return {"scales": scales, "part_subset": list(bank.part_subset)}


def dump_scale_bank(bank: ScaleBank, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(bank_document(bank), handle, ensure_ascii=False, indent=2)
        handle.write("\n")


def select_questions(bank: ScaleBank, mode: SelectionMode | str) -> list[Question]:
    """Questions of every scale (Full) or of the Part scales, ordered by scale then question id."""
    mode = SelectionMode(mode)
    if mode is SelectionMode.PART:
        if not bank.part_subset:
            raise EmptyPartSubset("Part selection requested but part_subset is empty")
        scale_ids = sorted(bank.part_subset)
    else:
        scale_ids = sorted(bank.scales)

    questions: list[Question] = []
    for scale_id in scale_ids:
        questions.extend(sorted(bank.scales[scale_id].questions, key=lambda q: natural_key(q.id)))
    return questions


def questions_by_dimension(scale: Scale) -> dict[str, list[Question]]:
    """Partition a scale's questions by dimension, in dimension order."""
    buckets: dict[str, list[Question]] = {dimension.code: [] for dimension in scale.dimensions}
    for question in scale.questions:
        buckets[question.dimension_code].append(question)
    return {code: questions for code, questions in buckets.items() if questions}


def _invert(mapping: Mapping[str, str]) -> dict[str, str]:
    return {value: key for key, value in mapping.items()}


def truth_levels(scale: Scale, label: Label) -> dict[str, Level]:
    """Convert a label of any kind into levels for the dimensions it annotates."""
    scored = scale.scored_dimensions
    if scale.label_kind is LabelKind.PER_DIMENSION_LEVEL:
        if not isinstance(label, Mapping):
            raise ValueError(f"{scale.id} labels are per-dimension level maps")
        codes = {d.code for d in scored}
        levels: dict[str, Level] = {}
        for code, level in label.items():
            if code not in codes:
                raise ValueError(f"{scale.id} has no scored dimension {code!r}")
            if level not in (LEVEL_HIGH, LEVEL_LOW):
                raise ValueError(f"level must be High or Low, got {level!r}")
            levels[code] = level
        return levels

    if not isinstance(label, str):
        raise ValueError(f"{scale.id} labels are strings")

    if scale.label_kind is LabelKind.QUADRANT:
        by_name = _invert(scale.quadrant_labels)
        if label not in by_name:
            raise ValueError(f"{label!r} is not one of {sorted(by_name)}")
        pattern = by_name[label]
        first, second = scored[0], scored[1]
        return {
            first.code: LEVEL_HIGH if pattern[0] == "H" else LEVEL_LOW,
            second.code: LEVEL_HIGH if pattern[1] == "H" else LEVEL_LOW,
        }

    main = [d for d in scored if not d.suffix]
    suffixes = [d for d in scored if d.suffix]
    head, _, tail = label.partition("-")
    if len(head) != len(main) or len(tail) > len(suffixes):
        raise ValueError(f"{label!r} does not fit the {scale.id} type alphabet")
    levels = {}
    for letter, dimension in zip(head + tail, main + suffixes[: len(tail)]):
        if letter == dimension.high_pole:
            levels[dimension.code] = LEVEL_HIGH
        elif letter == dimension.low_pole:
            levels[dimension.code] = LEVEL_LOW
        else:
            raise ValueError(f"{letter!r} is not a pole of {scale.id}/{dimension.code}")
    return levels


def render_label(scale: Scale, levels: Mapping[str, str]) -> Label:
    """Assemble a label of the scale's kind from a complete level map."""
    scored = scale.scored_dimensions
    if scale.label_kind is LabelKind.PER_DIMENSION_LEVEL:
        return {d.code: levels[d.code] for d in scored}
    if scale.label_kind is LabelKind.QUADRANT:
        pattern = "".join(levels[d.code][0] for d in scored[:2])
        return scale.quadrant_labels[pattern]

    def letter(dimension: Dimension) -> str:
        return dimension.high_pole if levels[dimension.code] == LEVEL_HIGH else dimension.low_pole

    code = "".join(letter(d) for d in scored if not d.suffix)
    suffix = "".join(letter(d) for d in scored if d.suffix)
    return f"{code}-{suffix}" if suffix else code
