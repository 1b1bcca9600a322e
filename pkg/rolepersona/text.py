"""Tokenizer shared by memory retrieval and Rouge-L."""

from __future__ import annotations

import unicodedata


def _strip_punctuation(token: str) -> str:
    return "".join(ch for ch in token if not unicodedata.category(ch).startswith("P"))


def tokenize(text: str) -> list[str]:
    """Lowercase, split on Unicode whitespace and drop punctuation characters.

    Tokens made only of punctuation disappear.
    """
    tokens = (_strip_punctuation(token) for token in text.lower().split())
    return [token for token in tokens if token]
