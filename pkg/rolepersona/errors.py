"""Custom exceptions for the rolepersona pipeline."""

from __future__ import annotations


class RolePersonaError(Exception):
    """Base error raised for pipeline failures."""


class MissingFile(RolePersonaError):
    """Raised when an input document does not exist."""


class SchemaViolation(RolePersonaError):
    """Raised when a document does not match its schema."""

    def __init__(self, message: str, pointer: str = "") -> None:
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class CountMismatch(SchemaViolation):
    """Raised when a scale's declared question count differs from its content."""


class UnknownScale(RolePersonaError, KeyError):
    """Raised when a scale id is not in the bank."""


class EmptyPartSubset(RolePersonaError):
    """Raised when the Part subset is requested but not defined."""


class DanglingLabel(SchemaViolation):
    """Raised when a label names a character that is not registered."""


class UnknownCharacter(RolePersonaError, KeyError):
    """Raised when a character name is not in the registry."""


class JudgeParseError(RolePersonaError):
    """Raised when a judge reply carries no parseable verdict."""


class ScoreParseError(JudgeParseError):
    """Raised when a judge reply carries no standalone score in range."""


class RankParseError(JudgeParseError):
    """Raised when a ranking reply cannot be read."""


class JudgeFailure(RolePersonaError):
    """Raised when every item of a dimension failed to judge."""


class UnsuitableQuestion(RolePersonaError):
    """Raised when interviewing with a question that lacks a positive verdict."""


class EmptyResponse(RolePersonaError):
    """Raised when the role-playing agent keeps answering with blank text."""


class InterviewFailed(RolePersonaError):
    """Raised when the gateway fails during an interview."""

    def __init__(self, character: str, question_id: str, reason: str) -> None:
        super().__init__(f"Interview of {character} on {question_id} failed: {reason}")
        self.character = character
        self.question_id = question_id


class InsufficientDimensions(RolePersonaError):
    """Raised when a scale cannot supply five distinct dimensions."""


class MissingDimension(RolePersonaError):
    """Raised when classification lacks a score for some dimension."""


class EmptyInput(RolePersonaError):
    """Raised when an aggregate is requested over nothing."""


class TestLeak(RolePersonaError):
    """Raised when a test character reaches a training export."""

    __test__ = False


class McqSchemaError(SchemaViolation):
    """Raised when a multiple-choice file is malformed."""


class RoundCountMismatch(RolePersonaError):
    """Raised when consistency is computed over the wrong number of rounds."""


class KeySetMismatch(RolePersonaError):
    """Raised when consistency rounds disagree on dimensions."""


class NoGroundTruthCoverage(RolePersonaError):
    """Raised when no evaluated character has ground truth."""

    def __init__(self, message: str, coverage: dict | None = None) -> None:
        super().__init__(message)
        self.coverage = coverage or {}


class ConfigError(RolePersonaError):
    """Raised when the run configuration is invalid."""


class MissingStore(RolePersonaError):
    """Raised when a stage needs an artifact an earlier stage did not write."""


class TemplateSlotError(RolePersonaError, KeyError):
    """Raised when a prompt template uses a slot the caller did not supply."""
