"""Pairwise judging of candidate answers against reference answers."""

from __future__ import annotations

import asyncio
import json
import logging
import random
from typing import Mapping, Sequence

from pydantic import BaseModel, ConfigDict

from ..const import JUDGE_TEMPERATURE
from ..errors import EmptyInput, RankParseError
from ..pyllm import ChatMessage, LLMGatewayClient, LLMGatewayError
from ..templates import WINRATE_SYSTEM, WINRATE_USER, PromptLibrary, default_library
from .parsing import parse_ranking
from .roleplay import RolePlayItem

_LOGGER = logging.getLogger(__name__)

MODEL_A = "model_a"
MODEL_B = "model_b"


class PairVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    item_id: str
    candidate_slot: str
    ranks: dict[str, int] = {}
    won: bool | None = None
    error: str | None = None


class WinRateReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    win_rate: float
    wins: int
    judged: int
    parse_failures: int
    seed: int | None
    verdicts: tuple[PairVerdict, ...]


def candidate_slot(seed: int | None, item_id: str) -> str:
    """Anonymous name the candidate answer appears under for this item."""
    rng = random.Random(f"{seed}:{item_id}")
    return MODEL_A if rng.random() < 0.5 else MODEL_B


def comparison_messages(
    item: RolePlayItem,
    role_description: str,
    slot: str,
    prompts: PromptLibrary,
) -> list[ChatMessage]:
    if item.candidate_answer is None:
        raise ValueError(f"item {item.id} has no candidate answer")
    if slot == MODEL_A:
        answers = [(MODEL_A, item.candidate_answer), (MODEL_B, item.reference_answer)]
    else:
        answers = [(MODEL_A, item.reference_answer), (MODEL_B, item.candidate_answer)]
    user = prompts.format(
        WINRATE_USER,
        role_name=item.character,
        role_description_and_catchphrases=role_description,
        question_dict=json.dumps({"question": item.question}, ensure_ascii=False),
        list_model_answer_dict=json.dumps(
            [{"model": name, "answer": answer} for name, answer in answers], ensure_ascii=False
        ),
    )
    return [
        ChatMessage(role="system", content=prompts.format(WINRATE_SYSTEM)),
        ChatMessage(role="user", content=user),
    ]


async def judge_pair(
    item: RolePlayItem,
    role_description: str,
    gateway: LLMGatewayClient,
    *,
    judge: str = "judge",
    seed: int | None = None,
    prompts: PromptLibrary | None = None,
) -> PairVerdict:
    slot = candidate_slot(seed, item.id)
    other = MODEL_B if slot == MODEL_A else MODEL_A
    messages = comparison_messages(item, role_description, slot, prompts or default_library())
    try:
        reply = await gateway.complete(judge, messages, temperature=JUDGE_TEMPERATURE, seed=seed)
        ranks = parse_ranking(reply.content)
        if slot not in ranks or other not in ranks:
            raise RankParseError(f"ranking names {sorted(ranks)}, expected {MODEL_A} and {MODEL_B}")
    except (RankParseError, LLMGatewayError) as exc:
        _LOGGER.warning("Win-rate judgment of %s excluded: %s", item.id, exc)
        return PairVerdict(item_id=item.id, candidate_slot=slot, error=str(exc))
    return PairVerdict(item_id=item.id, candidate_slot=slot, ranks=ranks, won=ranks[slot] < ranks[other])


async def run_win_rate(
    items: Sequence[RolePlayItem],
    gateway: LLMGatewayClient,
    *,
    roles: Mapping[str, str],
    judge: str = "judge",
    seed: int | None = None,
    prompts: PromptLibrary | None = None,
) -> WinRateReport:
    """Wins over judged items; items whose ranking could not be read leave the denominator."""
    verdicts = await asyncio.gather(
        *(
            judge_pair(item, roles.get(item.character, ""), gateway, judge=judge, seed=seed, prompts=prompts)
            for item in items
        )
    )
    judged = [v for v in verdicts if v.won is not None]
    if not judged:
        raise EmptyInput("No win-rate item was judged")
    wins = sum(bool(v.won) for v in judged)
    return WinRateReport(
        win_rate=wins / len(judged),
        wins=wins,
        judged=len(judged),
        parse_failures=len(verdicts) - len(judged),
        seed=seed,
        verdicts=tuple(verdicts),
    )


async def win_rate(items: Sequence[RolePlayItem], judge_gateway: LLMGatewayClient, **kwargs) -> float:
    kwargs.setdefault("roles", {})
    report = await run_win_rate(items, judge_gateway, **kwargs)
    return report.win_rate
