"""Spread of per-dimension scores across interview rounds."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..const import CONSISTENCY_ROUNDS
from ..errors import EmptyInput, KeySetMismatch, RoundCountMismatch


class ConsistencyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    scale_id: str
    character: str = ""
    per_dimension_std: dict[str, float]
    average_std: float
    n_rounds: int = CONSISTENCY_ROUNDS
    sample: bool = False

    @model_validator(mode="after")
    def _check_average(self) -> "ConsistencyReport":
        if any(std < 0 for std in self.per_dimension_std.values()) or self.average_std < 0:
            raise ValueError("standard deviations are never negative")
        expected = float(np.mean(list(self.per_dimension_std.values())))
        if not np.isclose(self.average_std, expected, rtol=0, atol=1e-12):
            raise ValueError(f"average_std {self.average_std} is not the mean {expected}")
        return self


class ConsistencySummary(BaseModel):
    """Per-character reports on one scale and their averaged figure."""

    model_config = ConfigDict(frozen=True)

    scale_id: str
    average_std: float
    reports: tuple[ConsistencyReport, ...]
    skipped: tuple[str, ...] = ()


def consistency(
    rounds: Sequence[Mapping[str, float]],
    scale_id: str = "",
    *,
    sample: bool = False,
    n_rounds: int = CONSISTENCY_ROUNDS,
    character: str = "",
) -> ConsistencyReport:
    """Standard deviation per dimension over the rounds, then their mean; lower is steadier.

    Population deviation by default, sample deviation with ``sample=True``.
    """
    if len(rounds) != n_rounds:
        raise RoundCountMismatch(f"Expected {n_rounds} rounds, got {len(rounds)}")
    keys = set(rounds[0])
    for index, scores in enumerate(rounds[1:], start=2):
        if set(scores) != keys:
            raise KeySetMismatch(
                f"Round {index} covers {sorted(scores)} but round 1 covers {sorted(keys)}"
            )
    if not keys:
        raise EmptyInput("Consistency rounds hold no dimensions")

    ddof = 1 if sample else 0
    per_dimension = {
        code: float(np.std(np.array([scores[code] for scores in rounds], dtype=float), ddof=ddof))
        for code in sorted(keys)
    }
    return ConsistencyReport(
        scale_id=scale_id,
        character=character,
        per_dimension_std=per_dimension,
        average_std=float(np.mean(list(per_dimension.values()))),
        n_rounds=n_rounds,
        sample=sample,
    )


def summarize(scale_id: str, reports: Sequence[ConsistencyReport], skipped: Sequence[str] = ()) -> ConsistencySummary:
    if not reports:
        raise EmptyInput(f"No consistency report for {scale_id}")
    return ConsistencySummary(
        scale_id=scale_id,
        average_std=float(np.mean([report.average_std for report in reports])),
        reports=tuple(reports),
        skipped=tuple(skipped),
    )
