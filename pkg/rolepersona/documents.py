"""Reading JSON documents into pydantic models with pointer-style errors."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, TypeVar

from pydantic import BaseModel, ConfigDict, TypeAdapter, ValidationError

from .errors import MissingFile, SchemaViolation

_LOGGER = logging.getLogger(__name__)

ModelT = TypeVar("ModelT")


class DocumentModel(BaseModel):
    """Base model for input documents; unknown keys are kept and reported."""

    model_config = ConfigDict(extra="allow", populate_by_name=True, frozen=True)

    def model_post_init(self, __context: Any) -> None:
        extras = getattr(self, "__pydantic_extra__", None) or {}
        if extras:
            _LOGGER.warning(
                "Unexpected keys for %s: %s",
                self.__class__.__name__,
                sorted(extras.keys()),
            )


def json_pointer(loc: Iterable[Any]) -> str:
    """Render a pydantic error location as a JSON pointer."""
    parts = [str(part).replace("~", "~0").replace("/", "~1") for part in loc]
    return "/" + "/".join(parts) if parts else ""


def read_json(path: str | Path, error: type[SchemaViolation] = SchemaViolation) -> Any:
    """Load a UTF-8 JSON file, raising MissingFile or a schema error."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"No such file: {path}")
    try:
        with path.open(encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise error(f"Invalid JSON at line {exc.lineno}: {exc.msg}", "") from exc
    except UnicodeDecodeError as exc:
        raise error(f"Not UTF-8 at byte {exc.start}: {exc.reason}", "") from exc


def validate_document(
    kind: type[ModelT] | Any,
    data: Any,
    error: type[SchemaViolation] = SchemaViolation,
) -> ModelT:
    """Validate data against a model or type, converting the first error to a pointer."""
    adapter = TypeAdapter(kind)
    try:
        return adapter.validate_python(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise error(first["msg"], json_pointer(first["loc"])) from exc
