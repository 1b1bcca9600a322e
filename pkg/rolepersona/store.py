"""On-disk artifact store shared by the pipeline stages."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable

import pandas as pd

from .errors import MissingStore

_LOGGER = logging.getLogger(__name__)

INDEX = "store.json"

RECORDS = "interviews/records.jsonl"
VERDICTS = "interviews/verdicts.json"
ASSESSMENTS = "filter/assessments.json"
ASSESSMENTS_CSV = "filter/assessments.csv"
OUTCOMES = "filter/outcomes.json"
KEPT = "filter/kept.jsonl"
MANIFEST = "manifest.json"


def export_path(subset: str) -> str:
    return f"export/{subset}.jsonl"


def export_manifest_path(subset: str) -> str:
    return f"export/{subset}.manifest.json"


def report_path(metric: str, suffix: str = "json") -> str:
    return f"reports/{metric}.{suffix}"


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        mode="wb",
        dir=path.parent,
        prefix=path.name + ".",
        suffix=".tmp",
        delete=False,
    ) as handle:
        handle.write(data)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(handle.name, path)


def _json_bytes(payload: Any) -> bytes:
    return (json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n").encode("utf-8")


class ArtifactStore:
    """Artifacts under one output directory, indexed by sha256 in ``store.json``."""

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = Path(root)
        index = self.root / INDEX
        self.index: dict[str, str] = json.loads(index.read_text("utf-8")) if index.is_file() else {}

    def path(self, name: str) -> Path:
        return self.root / name

    def exists(self, name: str) -> bool:
        return self.path(name).is_file()

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.path(name)
        atomic_write(path, data)
        self.index[name] = hashlib.sha256(data).hexdigest()
        atomic_write(self.root / INDEX, _json_bytes(self.index))
        _LOGGER.debug("Wrote %s (%d bytes)", name, len(data))
        return path

    def track(self, name: str) -> Path:
        """Index a file some other writer placed under the store."""
        data = self.read_bytes(name)
        self.index[name] = hashlib.sha256(data).hexdigest()
        atomic_write(self.root / INDEX, _json_bytes(self.index))
        return self.path(name)

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_bytes(name, _json_bytes(payload))

    def write_jsonl(self, name: str, rows: Iterable[Any]) -> Path:
        lines = [json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n" for row in rows]
        return self.write_bytes(name, "".join(lines).encode("utf-8"))

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        return self.write_bytes(name, frame.to_csv(index=False).encode("utf-8"))

    def read_bytes(self, name: str) -> bytes:
        path = self.path(name)
        if not path.is_file():
            raise MissingStore(f"{name} not found under {self.root}; run the earlier stage first")
        return path.read_bytes()

    def read_json(self, name: str) -> Any:
        return json.loads(self.read_bytes(name))

    def read_jsonl(self, name: str) -> list[Any]:
        text = self.read_bytes(name).decode("utf-8")
        return [json.loads(line) for line in text.splitlines() if line.strip()]

    def verify(self, name: str) -> bool:
        """Whether the file on disk still matches its indexed digest."""
        expected = self.index.get(name)
        if expected is None or not self.exists(name):
            return False
        return hashlib.sha256(self.path(name).read_bytes()).hexdigest() == expected
