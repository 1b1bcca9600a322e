"""Readers for judge and subject replies."""

from __future__ import annotations

import ast
import json
import re
from typing import Any, Iterable

from ..const import JUDGE_HIGH, JUDGE_LOW
from ..errors import RankParseError, ScoreParseError

_INTEGER_LINE = re.compile(r"^\s*(\d+)\s*$")
_ANSWER = re.compile(r"Answer:\s*\(?([A-Z])\b")
_QUOTES = str.maketrans({"‘": "'", "’": "'", "“": '"', "”": '"', "−": "-"})


def parse_score(reply: str, low: int = JUDGE_LOW, high: int = JUDGE_HIGH) -> int:
    """The last line holding nothing but an integer within [low, high]."""
    for line in reversed(reply.splitlines()):
        match = _INTEGER_LINE.match(line)
        if match and low <= int(match.group(1)) <= high:
            return int(match.group(1))
    raise ScoreParseError(f"No standalone score in {low}-{high} found")


def parse_option_letter(reply: str, letters: Iterable[str]) -> str | None:
    """An explicit "Answer: X" wins, else the first standalone option letter."""
    allowed = set(letters)
    explicit = _ANSWER.search(reply)
    if explicit and explicit.group(1) in allowed:
        return explicit.group(1)
    if not allowed:
        return None
    pattern = re.compile(r"\b([" + "".join(sorted(allowed)) + r"])\b")
    match = pattern.search(reply)
    return match.group(1) if match else None


def _normalise_quotes(text: str) -> str:
    # typographic doubled single quotes stand in for a double quote
    return text.replace("‘‘", '"').replace("’’", '"').translate(_QUOTES)


def _literal(text: str) -> Any:
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        pass
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise RankParseError(f"Ranking is neither a Python nor a JSON literal: {exc.msg}") from exc


def parse_ranking(reply: str) -> dict[str, int]:
    """Map model name to rank from a reply shaped like [{"model", "reason", "rank"}, ...]."""
    text = _normalise_quotes(reply)
    start, end = text.find("["), text.rfind("]")
    if start < 0 or end <= start:
        raise RankParseError("No list found in ranking reply")
    entries = _literal(text[start : end + 1])
    if not isinstance(entries, list):
        raise RankParseError("Ranking reply is not a list")

    ranks: dict[str, int] = {}
    for entry in entries:
        if not isinstance(entry, dict) or "model" not in entry or "rank" not in entry:
            raise RankParseError(f"Ranking entry lacks model or rank: {entry!r}")
        try:
            ranks[str(entry["model"])] = int(entry["rank"])
        except (TypeError, ValueError) as exc:
            raise RankParseError(f"Rank is not an integer: {entry['rank']!r}") from exc
    return ranks
