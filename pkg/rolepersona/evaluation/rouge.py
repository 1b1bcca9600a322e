"""Rouge-L over whitespace tokens."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..errors import EmptyInput
from ..text import tokenize


class RougePair(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    f_score: float


class RougeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_f_score: float
    pairs: tuple[RougePair, ...]


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length, one DP row at a time."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l_tokens(candidate: Sequence[str], reference: Sequence[str]) -> float:
    common = lcs_length(candidate, reference)
    if common == 0:
        return 0.0
    recall = common / len(reference)
    precision = common / len(candidate)
    return 2 * recall * precision / (recall + precision)


def rouge_l(candidate: str, reference: str) -> float:
    """F1 of LCS recall and precision; empty or disjoint texts score 0."""
    return rouge_l_tokens(tokenize(candidate), tokenize(reference))


def rouge_report(pairs: Iterable[tuple[str, str, str]]) -> RougeReport:
    """Per-pair and mean F1 over (id, candidate, reference) triples."""
    scored = [RougePair(id=item_id, f_score=rouge_l(cand, ref)) for item_id, cand, ref in pairs]
    if not scored:
        raise EmptyInput("Rouge-L needs at least one pair")
    return RougeReport(
        mean_f_score=float(np.mean([pair.f_score for pair in scored])),
        pairs=tuple(scored),
    )
