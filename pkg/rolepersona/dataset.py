"""Assembly and export of the fine-tuning subsets."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable

from pydantic import BaseModel, ConfigDict, model_validator

from .characters import Registry, is_test_character
from .const import (
    MULTI_TURN_LENGTH,
    REFERENCE_SUBSET_COUNTS,
    SUBSET_FULL_SINGLE,
    SUBSET_PART_MULTI,
    SUBSET_PART_SINGLE,
)
from .errors import SchemaViolation, TestLeak
from .interview import InterviewKind, InterviewRecord, conversation_messages
from .pyllm import ChatMessage
from .scale_bank import ScaleBank
from .store import atomic_write
from .templates import PromptLibrary

_LOGGER = logging.getLogger(__name__)

_SUBSET_RULES = {
    SUBSET_FULL_SINGLE: (InterviewKind.SINGLE, False, frozenset({"Full", "Single"})),
    SUBSET_PART_SINGLE: (InterviewKind.SINGLE, True, frozenset({"Part", "Single"})),
    SUBSET_PART_MULTI: (InterviewKind.MULTI, True, frozenset({"Part", "Multi"})),
}


class DatasetSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    character: str
    messages: tuple[ChatMessage, ...]
    subset_tags: frozenset[str] = frozenset()
    source_record: str = ""

    @model_validator(mode="after")
    def _check_roles(self) -> "DatasetSample":
        roles = [message.role for message in self.messages]
        if not roles or roles[0] != "system":
            raise ValueError("a sample opens with exactly one system message")
        body = roles[1:]
        expected = ["user", "assistant"] * (len(body) // 2)
        if body != expected or not body:
            raise ValueError(f"roles must alternate user/assistant and end with assistant: {roles}")
        pairs = len(body) // 2
        if "Single" in self.subset_tags and pairs != 1:
            raise ValueError(f"Single samples hold one exchange, got {pairs}")
        if "Multi" in self.subset_tags and pairs != MULTI_TURN_LENGTH:
            raise ValueError(f"Multi samples hold {MULTI_TURN_LENGTH} exchanges, got {pairs}")
        return self

    def export_row(self) -> dict:
        return {
            "id": self.id,
            "character": self.character,
            "messages": [message.model_dump() for message in self.messages],
        }


class SubsetManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    sample_count: int
    question_count: int
    turn_count: int
    character_roster: tuple[str, ...]
    content_digest: str
    question_ids: tuple[str, ...] = ()
    reference_counts: dict[str, int] = {}


def samples_jsonl(samples: Iterable[DatasetSample]) -> bytes:
    ordered = sorted(samples, key=lambda sample: sample.id)
    lines = [json.dumps(sample.export_row(), ensure_ascii=False) + "\n" for sample in ordered]
    return "".join(lines).encode("utf-8")


def build_subset(
    name: str,
    records: Iterable[InterviewRecord],
    bank: ScaleBank,
    registry: Registry,
    prompts: PromptLibrary | None = None,
) -> tuple[list[DatasetSample], SubsetManifest]:
    """Samples of one subset from kept records, with a manifest computed from them."""
    try:
        kind, part_only, tags = _SUBSET_RULES[name]
    except KeyError:
        raise ValueError(f"unknown subset {name!r}; expected one of {sorted(_SUBSET_RULES)}") from None

    records = list(records)
    leaked = sorted({r.character for r in records if is_test_character(registry, r.character)})
    if leaked:
        raise TestLeak(f"Test characters reached the {name} export: {leaked}")

    scales = set(bank.part_subset) if part_only else set(bank.scales)
    samples = [
        DatasetSample(
            id=f"{name}-{record.record_id}",
            character=record.character,
            messages=tuple(conversation_messages(record, prompts)),
            subset_tags=tags,
            source_record=record.record_id,
        )
        for record in records
        if record.kind is kind and record.scale_id in scales
    ]
    samples.sort(key=lambda sample: sample.id)

    if not samples:
        _LOGGER.warning("Subset %s is empty", name)

    by_id = {r.record_id: r for r in records}
    question_ids = sorted(
        {f"{by_id[s.source_record].scale_id}/{q}" for s in samples for q in by_id[s.source_record].question_ids}
    )
    manifest = SubsetManifest(
        name=name,
        sample_count=len(samples),
        question_count=len(question_ids),
        turn_count=1 if kind is InterviewKind.SINGLE else MULTI_TURN_LENGTH,
        character_roster=tuple(sorted({s.character for s in samples})),
        content_digest=hashlib.sha256(samples_jsonl(samples)).hexdigest(),
        question_ids=tuple(question_ids),
        reference_counts=REFERENCE_SUBSET_COUNTS[name],
    )
    return samples, manifest


def export_jsonl(samples: Iterable[DatasetSample], path: str | Path) -> Path:
    """Write one sample per line, ordered by id; an empty list gives an empty file."""
    path = Path(path)
    atomic_write(path, samples_jsonl(samples))
    return path


def load_jsonl(path: str | Path) -> list[DatasetSample]:
    samples: list[DatasetSample] = []
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                samples.append(DatasetSample.model_validate(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as exc:
                raise SchemaViolation(f"line {number}: {exc}", f"/{number - 1}") from exc
    return samples
