"""Role-playing agent interviews: suitability screening, single- and multi-turn sessions."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import StrEnum
from typing import Callable

from pydantic import BaseModel, ConfigDict, model_validator

from .characters import CharacterProfile, MemoryExcerpt, retrieve_memory
from .const import DEFAULT_MEMORY_K, GENERATION_TEMPERATURE, JUDGE_TEMPERATURE, MULTI_TURN_LENGTH
from .errors import (
    EmptyResponse,
    InsufficientDimensions,
    InterviewFailed,
    JudgeParseError,
    UnsuitableQuestion,
)
from .pyllm import ChatMessage, ChatResponse, LLMGatewayClient, LLMGatewayError
from .scale_bank import Question, Scale, natural_key
from .templates import (
    RPA_SYSTEM,
    RPA_USER,
    SUITABILITY,
    PromptLibrary,
    default_library,
    render_history,
    render_memory,
)

_LOGGER = logging.getLogger(__name__)

_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


class InterviewKind(StrEnum):
    SINGLE = "Single"
    MULTI = "Multi"


class Turn(BaseModel):
    model_config = ConfigDict(frozen=True)

    question_id: str
    question_text: str
    response_text: str
    dimension_code: str


class InterviewRecord(BaseModel):
    """One character answering one (Single) or five (Multi) questions of a scale."""

    model_config = ConfigDict(frozen=True)

    record_id: str
    character: str
    scale_id: str
    kind: InterviewKind
    turns: tuple[Turn, ...]
    generator_model: str
    created_at: datetime
    system_prompt: str

    @model_validator(mode="after")
    def _check_turns(self) -> "InterviewRecord":
        expected = 1 if self.kind is InterviewKind.SINGLE else MULTI_TURN_LENGTH
        if len(self.turns) != expected:
            raise ValueError(f"{self.kind} records need {expected} turn(s), got {len(self.turns)}")
        codes = [turn.dimension_code for turn in self.turns]
        if len(set(codes)) != len(codes):
            raise ValueError(f"dimension codes repeat within a record: {codes}")
        return self

    @property
    def question_ids(self) -> list[str]:
        return [turn.question_id for turn in self.turns]

    @property
    def dimension_codes(self) -> list[str]:
        return [turn.dimension_code for turn in self.turns]


class SuitabilityVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    question_id: str
    scale_id: str
    character: str
    suitable: bool
    judge_rationale: str
    flagged: bool = False


def record_digest(character: str, scale_id: str, kind: InterviewKind | str, question_ids: list[str]) -> str:
    canonical = json.dumps(
        [character, scale_id, str(kind), question_ids], ensure_ascii=False, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def parse_yes_no(reply: str) -> bool:
    """The first standalone yes/no token decides."""
    match = _YES_NO.search(reply)
    if match is None:
        raise JudgeParseError(f"No yes/no verdict in {reply[:80]!r}")
    return match.group(1).lower() == "yes"


@dataclass
class RpaPromptSpec:
    """Persona, retrieved memory and prior turns that condition one agent reply."""

    character: CharacterProfile
    system_preamble: str
    memory_snippets: list[MemoryExcerpt]
    history: list[tuple[str, str]] = field(default_factory=list)
    max_turns: int = MULTI_TURN_LENGTH

    def __post_init__(self) -> None:
        if len(self.history) >= self.max_turns:
            raise ValueError(f"history of {len(self.history)} turns leaves no room under {self.max_turns}")

    def messages(self, question_text: str, prompts: PromptLibrary) -> list[ChatMessage]:
        return chat_messages(
            self.character.name,
            self.system_preamble,
            [*self.history, (question_text, None)],
            prompts,
        )


def chat_messages(
    name: str,
    system_prompt: str,
    turns: list[tuple[str, str | None]],
    prompts: PromptLibrary,
) -> list[ChatMessage]:
    """System prompt, then one user message per question with the reply after it when known."""
    messages = [ChatMessage(role="system", content=system_prompt)]
    answered: list[tuple[str, str]] = []
    for question, reply in turns:
        user = prompts.render(RPA_USER, question=question, history=render_history(answered, name))
        messages.append(ChatMessage(role="user", content=user))
        if reply is not None:
            messages.append(ChatMessage(role="assistant", content=reply))
            answered.append((question, reply))
    return messages


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class InterviewEngine:
    """Runs interviews through the gateway and keeps the suitability ledger."""

    def __init__(
        self,
        gateway: LLMGatewayClient,
        *,
        prompts: PromptLibrary | None = None,
        generator: str = "generator",
        judge: str = "judge",
        memory_k: int = DEFAULT_MEMORY_K,
        temperature: float = GENERATION_TEMPERATURE,
        seed: int | None = None,
        require_screening: bool = True,
        clock: Callable[[], datetime] = _utcnow,
    ) -> None:
        self.gateway = gateway
        self.prompts = prompts or default_library()
        self.generator = generator
        self.judge = judge
        self.memory_k = memory_k
        self.temperature = temperature
        self.seed = seed
        self.require_screening = require_screening
        self.verdicts: dict[tuple[str, str, str], SuitabilityVerdict] = {}
        self._clock = clock

    def prompt_spec(self, character: CharacterProfile, first_question: str) -> RpaPromptSpec:
        memory = retrieve_memory(character, first_question, self.memory_k)
        return RpaPromptSpec(
            character=character,
            system_preamble=self.prompts.render(
                RPA_SYSTEM,
                name=character.name,
                description=character.description,
                memory=render_memory(memory),
            ),
            memory_snippets=memory,
        )

    async def judge_suitability(self, character: CharacterProfile, question: Question) -> SuitabilityVerdict:
        """Ask the judge whether a question fits the character; unreadable replies exclude it."""
        key = (character.name, question.scale_id, question.id)
        if key in self.verdicts:
            return self.verdicts[key]

        prompt = self.prompts.render(
            SUITABILITY,
            name=character.name,
            description=character.description,
            question=question.text,
        )
        try:
            response = await self.gateway.complete(
                self.judge,
                [ChatMessage(role="user", content=prompt)],
                temperature=JUDGE_TEMPERATURE,
                seed=self.seed,
            )
        except LLMGatewayError as exc:
            raise InterviewFailed(character.name, question.id, str(exc)) from exc

        try:
            suitable, flagged = parse_yes_no(response.content), False
        except JudgeParseError as exc:
            _LOGGER.warning("Suitability of %s for %s flagged: %s", question.id, character.name, exc)
            suitable, flagged = False, True

        verdict = SuitabilityVerdict(
            question_id=question.id,
            scale_id=question.scale_id,
            character=character.name,
            suitable=suitable,
            judge_rationale=response.content.strip(),
            flagged=flagged,
        )
        self.verdicts[key] = verdict
        return verdict

    def is_suitable(self, character: CharacterProfile, question: Question) -> bool:
        if not self.require_screening:
            return True
        verdict = self.verdicts.get((character.name, question.scale_id, question.id))
        return verdict is not None and verdict.suitable

    async def _reply(self, character: CharacterProfile, question: Question, messages: list[ChatMessage]) -> str:
        """One agent reply; a blank reply is asked once more before giving up."""
        for attempt in range(2):
            try:
                response: ChatResponse = await self.gateway.complete(
                    self.generator,
                    messages,
                    temperature=self.temperature,
                    seed=self.seed,
                )
            except LLMGatewayError as exc:
                raise InterviewFailed(character.name, question.id, str(exc)) from exc
            if response.content.strip():
                return response.content
            _LOGGER.debug("Blank reply from %s on %s (attempt %d)", character.name, question.id, attempt + 1)
        raise EmptyResponse(f"{character.name} gave no answer to {question.id}")

    async def run_single_interview(self, character: CharacterProfile, question: Question) -> InterviewRecord:
        if not self.is_suitable(character, question):
            raise UnsuitableQuestion(f"{question.id} has no positive verdict for {character.name}")

        spec = self.prompt_spec(character, question.text)
        reply = await self._reply(character, question, spec.messages(question.text, self.prompts))
        _LOGGER.debug("Interviewed %s on %s", character.name, question.id)
        return InterviewRecord(
            record_id=record_digest(character.name, question.scale_id, InterviewKind.SINGLE, [question.id]),
            character=character.name,
            scale_id=question.scale_id,
            kind=InterviewKind.SINGLE,
            turns=(
                Turn(
                    question_id=question.id,
                    question_text=question.text,
                    response_text=reply,
                    dimension_code=question.dimension_code,
                ),
            ),
            generator_model=self.gateway.resolve_model(self.generator),
            created_at=self._clock(),
            system_prompt=spec.system_preamble,
        )

    def select_multi_questions(self, character: CharacterProfile, scale: Scale, rng_seed: int) -> list[Question]:
        """Five suitable questions from five distinct scored dimensions, reproducible under the seed."""
        eligible: dict[str, list[Question]] = {}
        for dimension in scale.scored_dimensions:
            questions = [
                q
                for q in scale.questions
                if q.dimension_code == dimension.code and self.is_suitable(character, q)
            ]
            if questions:
                eligible[dimension.code] = sorted(questions, key=lambda q: natural_key(q.id))

        if len(eligible) < MULTI_TURN_LENGTH:
            raise InsufficientDimensions(
                f"{scale.id} offers {len(eligible)} dimension(s) with suitable questions for "
                f"{character.name}; {MULTI_TURN_LENGTH} are needed"
            )

        rng = random.Random(f"{rng_seed}:{character.name}:{scale.id}")
        codes = rng.sample(list(eligible), MULTI_TURN_LENGTH)
        return [rng.choice(eligible[code]) for code in codes]

    async def run_multi_interview(self, character: CharacterProfile, scale: Scale, rng_seed: int) -> InterviewRecord:
        questions = self.select_multi_questions(character, scale, rng_seed)
        spec = self.prompt_spec(character, questions[0].text)
        turns: list[Turn] = []
        for question in questions:
            # each turn sees every earlier answer verbatim
            spec = replace(spec, history=[(t.question_text, t.response_text) for t in turns])
            reply = await self._reply(character, question, spec.messages(question.text, self.prompts))
            turns.append(
                Turn(
                    question_id=question.id,
                    question_text=question.text,
                    response_text=reply,
                    dimension_code=question.dimension_code,
                )
            )
        _LOGGER.debug("Multi-turn interview of %s on %s: %s", character.name, scale.id, [q.id for q in questions])
        return InterviewRecord(
            record_id=record_digest(character.name, scale.id, InterviewKind.MULTI, [q.id for q in questions]),
            character=character.name,
            scale_id=scale.id,
            kind=InterviewKind.MULTI,
            turns=tuple(turns),
            generator_model=self.gateway.resolve_model(self.generator),
            created_at=self._clock(),
            system_prompt=spec.system_preamble,
        )


def conversation_messages(record: InterviewRecord, prompts: PromptLibrary | None = None) -> list[ChatMessage]:
    """The record replayed as a chat with the conditioning it was generated under."""
    return chat_messages(
        record.character,
        record.system_prompt,
        [(turn.question_text, turn.response_text) for turn in record.turns],
        prompts or default_library(),
    )
