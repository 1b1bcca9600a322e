"""Shared fixtures: a tiny bank and registry, and gateways that never leave the process."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import httpx
import pytest

from rolepersona.characters import parse_registry
from rolepersona.pyllm import LLMGatewayClient
from rolepersona.pyllm.const import MOCK_BASE_URL
from rolepersona.scale_bank import parse_scale_bank
from rolepersona.templates import PromptLibrary

Replier = Callable[[list[dict]], str]


def _questions(scale: str, dimensions: list[str], per_dimension: int) -> list[dict]:
    questions = []
    number = 1
    for index in range(per_dimension):
        for code in dimensions:
            questions.append(
                {
                    "id": f"{scale}-{number:02d}",
                    "dimension": code,
                    "reverse_scored": index % 2 == 1,
                    "language": "en",
                    "text": f"Question {number} probing {code} on {scale}?",
                }
            )
            number += 1
    return questions


def tiny_bank_document() -> dict:
    return {
        "part_subset": ["16P", "BFI"],
        "scales": [
            {
                "id": "16P",
                "name": "16Personalities",
                "label_kind": "categorical_type",
                "dimensions": [
                    {"code": "E", "name": "Mind", "high_pole": "E", "low_pole": "I"},
                    {"code": "N", "name": "Energy", "high_pole": "N", "low_pole": "S"},
                    {"code": "T", "name": "Nature", "high_pole": "T", "low_pole": "F"},
                    {"code": "J", "name": "Tactics", "high_pole": "J", "low_pole": "P"},
                    {"code": "A", "name": "Identity", "high_pole": "A", "low_pole": "T", "suffix": True},
                ],
                "declared_count": 10,
                "questions": _questions("16P", ["E", "N", "T", "J", "A"], 2),
            },
            {
                "id": "BFI",
                "name": "Big Five Inventory",
                "label_kind": "per_dimension_level",
                "dimensions": [
                    {"code": code, "name": name}
                    for code, name in [
                        ("O", "Openness"),
                        ("C", "Conscientiousness"),
                        ("E", "Extraversion"),
                        ("A", "Agreeableness"),
                        ("N", "Neuroticism"),
                    ]
                ],
                "declared_count": 5,
                "questions": _questions("BFI", ["O", "C", "E", "A", "N"], 1),
            },
            {
                "id": "BSRI",
                "name": "Bem Sex-Role Inventory",
                "label_kind": "quadrant",
                "dimensions": [
                    {"code": "M", "name": "Masculinity", "threshold": 4.9},
                    {"code": "F", "name": "Femininity", "threshold": 4.8},
                    {"code": "N", "name": "Neutral", "filler": True},
                ],
                "declared_count": 3,
                "questions": _questions("BSRI", ["M", "F", "N"], 1),
            },
        ],
    }


def tiny_registry_document() -> dict:
    def character(name: str, split: str) -> dict:
        return {
            "name": name,
            "source": "RoleLLM" if split == "Train" else "Other",
            "split": split,
            "description": f"{name} is a character used in tests.",
            "memory": [
                {"text": f"{name} remembers a quiet morning by the river.", "source_tag": "scene-1"},
                {"text": f"{name} argues about friends and parties.", "source_tag": "scene-2"},
            ],
        }

    return {
        "characters": [
            character("Alice", "Train"),
            character("Bob", "Train"),
            character("Tess", "Test"),
            character("Theo", "Test"),
        ],
        "labels": [
            {"character": "Alice", "scale": "16P", "label": "INTJ-A"},
            {"character": "Bob", "scale": "16P", "label": "ESFP"},
            {"character": "Tess", "scale": "16P", "label": "ENTJ-A"},
            {"character": "Theo", "scale": "16P", "label": "ENTJ-A"},
        ],
    }


@pytest.fixture
def bank():
    return parse_scale_bank(tiny_bank_document())


@pytest.fixture
def registry(bank):
    return parse_registry(tiny_registry_document(), bank)


@pytest.fixture
def prompts() -> PromptLibrary:
    return PromptLibrary()


def completion_body(content: str, finish_reason: str = "stop") -> dict:
    return {
        "id": "test",
        "object": "chat.completion",
        "model": "test-model",
        "choices": [
            {
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": finish_reason,
            }
        ],
        "usage": {"prompt_tokens": 3, "completion_tokens": 2, "total_tokens": 5},
    }


def make_gateway(replier: Replier, **kwargs) -> LLMGatewayClient:
    """Gateway whose replies come from a function of the request messages."""

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content)
        return httpx.Response(200, json=completion_body(replier(payload["messages"])))

    return LLMGatewayClient(MOCK_BASE_URL, transport=httpx.MockTransport(handler), **kwargs)


def prompt_text(messages: list[dict]) -> str:
    return "\n".join(message["content"] for message in messages)


@pytest.fixture
def write_json(tmp_path: Path) -> Callable[[str, object], Path]:
    def write(name: str, payload: object) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return write
