"""Character profiles, memory retrieval, ground-truth labels and the train/test split."""

from __future__ import annotations

import logging
from collections import Counter
from enum import StrEnum
from pathlib import Path
from typing import Any

from pydantic import Field, field_validator

from .const import DEFAULT_MEMORY_K
from .documents import DocumentModel, read_json, validate_document
from .errors import DanglingLabel, SchemaViolation, UnknownCharacter, UnknownScale
from .scale_bank import Label, ScaleBank, truth_levels
from .text import tokenize

_LOGGER = logging.getLogger(__name__)


class Source(StrEnum):
    ROLELLM = "RoleLLM"
    CHATHARUHI = "ChatHaruhi"
    OTHER = "Other"


class Split(StrEnum):
    TRAIN = "Train"
    TEST = "Test"


class MemoryExcerpt(DocumentModel):
    text: str
    source_tag: str = ""


class CharacterProfile(DocumentModel):
    name: str
    source: Source = Source.OTHER
    description: str
    memory: tuple[MemoryExcerpt, ...] = ()
    split: Split = Split.TRAIN

    @field_validator("description")
    @classmethod
    def _description_not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("description must not be empty")
        return value


class GroundTruthLabel(DocumentModel):
    character: str
    scale_id: str = Field(alias="scale")
    label: Label


class Registry(DocumentModel):
    characters: dict[str, CharacterProfile] = Field(default_factory=dict)
    labels: tuple[GroundTruthLabel, ...] = ()

    def profile(self, name: str) -> CharacterProfile:
        try:
            return self.characters[name]
        except KeyError:
            raise UnknownCharacter(name) from None


class _RegistryFile(DocumentModel):
    characters: list[CharacterProfile] = Field(default_factory=list)
    labels: list[GroundTruthLabel] = Field(default_factory=list)


def parse_registry(data: Any, bank: ScaleBank | None = None) -> Registry:
    """Validate a decoded registry document.

    With a bank, labels must name a known scale and fit its label alphabet.
    """
    document = validate_document(_RegistryFile, data)
    characters: dict[str, CharacterProfile] = {}
    for index, profile in enumerate(document.characters):
        if profile.name in characters:
            raise SchemaViolation(f"duplicate character {profile.name!r}", f"/characters/{index}/name")
        characters[profile.name] = profile

    seen: set[tuple[str, str]] = set()
    for index, label in enumerate(document.labels):
        pointer = f"/labels/{index}"
        if label.character not in characters:
            raise DanglingLabel(f"label names unknown character {label.character!r}", f"{pointer}/character")
        if (label.character, label.scale_id) in seen:
            raise SchemaViolation(
                f"second label for {label.character!r} on {label.scale_id}", pointer
            )
        seen.add((label.character, label.scale_id))
        if bank is None:
            continue
        try:
            truth_levels(bank.scale(label.scale_id), label.label)
        except UnknownScale:
            raise SchemaViolation(f"unknown scale {label.scale_id!r}", f"{pointer}/scale") from None
        except ValueError as exc:
            raise SchemaViolation(str(exc), f"{pointer}/label") from exc

    if not characters:
        _LOGGER.warning("Registry contains no characters")
    return Registry(characters=characters, labels=tuple(document.labels))


def load_registry(path: str | Path, bank: ScaleBank | None = None) -> Registry:
    registry = parse_registry(read_json(path), bank)
    _LOGGER.debug(
        "Loaded %d characters and %d labels from %s",
        len(registry.characters),
        len(registry.labels),
        path,
    )
    return registry


def split_registry(registry: Registry) -> tuple[list[CharacterProfile], list[CharacterProfile]]:
    """Partition characters by split, keeping registry order."""
    train = [p for p in registry.characters.values() if p.split is Split.TRAIN]
    test = [p for p in registry.characters.values() if p.split is Split.TEST]
    return train, test


def is_test_character(registry: Registry, name: str) -> bool:
    return registry.profile(name).split is Split.TEST


def ground_truth_for(registry: Registry, character: str, scale_id: str) -> GroundTruthLabel | None:
    registry.profile(character)
    for label in registry.labels:
        if label.character == character and label.scale_id == scale_id:
            return label
    return None


def type_histogram(registry: Registry, scale_id: str, split: Split | str | None = None) -> dict[str, int]:
    """Count categorical labels on one scale, optionally within one split."""
    wanted = Split(split) if split is not None else None
    counts: Counter[str] = Counter()
    for label in registry.labels:
        if label.scale_id != scale_id or not isinstance(label.label, str):
            continue
        if wanted is not None and registry.characters[label.character].split is not wanted:
            continue
        # INTJ-A and INTJ-T both count as INTJ
        counts[label.label.partition("-")[0]] += 1
    return dict(sorted(counts.items()))


def retrieve_memory(profile: CharacterProfile, query: str, k: int = DEFAULT_MEMORY_K) -> list[MemoryExcerpt]:
    """Top-k excerpts by distinct-token overlap with the query; ties keep memory order."""
    if k <= 0 or not profile.memory:
        return []
    query_tokens = set(tokenize(query))
    scored = [
        (len(query_tokens & set(tokenize(excerpt.text))), index, excerpt)
        for index, excerpt in enumerate(profile.memory)
    ]
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [excerpt for _, _, excerpt in scored[:k]]
