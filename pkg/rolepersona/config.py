"""Run configuration: YAML file, environment interpolation and CLI overrides."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from pathlib import Path
from typing import Any, Mapping

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .assessor import FilterPolicy, Pooling
from .const import DEFAULT_MEMORY_K, EVAL_METRICS, GENERATION_TEMPERATURE, SUBSETS
from .documents import json_pointer
from .errors import ConfigError
from .pyllm.const import (
    BASE_URL,
    DEFAULT_API_KEY_ENV,
    DEFAULT_BACKOFF_BASE,
    DEFAULT_CONCURRENCY,
    DEFAULT_RETRY_BUDGET,
    DEFAULT_TIMEOUT,
)

_LOGGER = logging.getLogger(__name__)

_VARIABLE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class GatewaySettings(_Section):
    endpoint: str = BASE_URL
    api_key_env: str = DEFAULT_API_KEY_ENV
    models: dict[str, str] = {}
    concurrency: int = Field(DEFAULT_CONCURRENCY, ge=1)
    retry_budget: int = Field(DEFAULT_RETRY_BUDGET, ge=1)
    backoff_base: float = DEFAULT_BACKOFF_BASE
    timeout: float = DEFAULT_TIMEOUT
    cache_dir: Path | None = None
    mock_script: Path | None = None
    mock_latency: float = 0.0
    prices: dict[str, dict[str, float]] = {}


class GenerationSettings(_Section):
    characters: list[str] | None = None
    scales: list[str] | None = None
    single: bool = True
    multi: bool = True
    multi_scales: list[str] | None = None
    memory_k: int = Field(DEFAULT_MEMORY_K, ge=0)
    temperature: float = GENERATION_TEMPERATURE


class FilterSettings(_Section):
    policy: FilterPolicy = FilterPolicy.PER_DIMENSION


class ExportSettings(_Section):
    subsets: list[str] = list(SUBSETS)

    @field_validator("subsets")
    @classmethod
    def _known_subsets(cls, value: list[str]) -> list[str]:
        unknown = sorted(set(value) - set(SUBSETS))
        if unknown:
            raise ValueError(f"unknown subsets {unknown}; expected some of {list(SUBSETS)}")
        return value


class EvaluationSettings(_Section):
    metrics: list[str] = list(EVAL_METRICS)
    scales: list[str] = ["16P"]
    consistency_scales: list[str] = ["16P", "BFI"]
    characters: list[str] | None = None
    mcq_path: Path | None = None
    roleplay_path: Path | None = None
    pooling: Pooling = Pooling.POOLED
    sample_std: bool = False

    @field_validator("metrics")
    @classmethod
    def _known_metrics(cls, value: list[str]) -> list[str]:
        unknown = sorted(set(value) - set(EVAL_METRICS))
        if unknown:
            raise ValueError(f"unknown metrics {unknown}; expected some of {list(EVAL_METRICS)}")
        return value


class RunConfig(_Section):
    """Everything one pipeline run depends on, apart from the credential."""

    bank_path: Path
    registry_path: Path
    output_dir: Path
    seed: int | None = None
    prompts_dir: Path | None = None
    gateway: GatewaySettings = GatewaySettings()
    generation: GenerationSettings = GenerationSettings()
    filter: FilterSettings = FilterSettings()
    export: ExportSettings = ExportSettings()
    evaluation: EvaluationSettings = EvaluationSettings()

    @property
    def randomized(self) -> bool:
        metrics = set(self.evaluation.metrics)
        return self.generation.multi or bool(metrics & {"winrate", "consistency"})

    def api_key(self) -> str | None:
        return os.environ.get(self.gateway.api_key_env)

    def digest(self) -> str:
        """Hash of the settings that shape generated records; export and eval choices are left out."""
        settings = self.model_dump(
            mode="json",
            exclude={
                "output_dir": True,
                "export": True,
                "evaluation": True,
                "gateway": {"concurrency", "mock_latency", "prices"},
            },
        )
        canonical = json.dumps(settings, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def interpolate(value: Any, environ: Mapping[str, str] | None = None) -> Any:
    """Expand ``${VAR}`` and ``${VAR:-default}`` in every string of a nested document."""
    environ = os.environ if environ is None else environ
    if isinstance(value, dict):
        return {key: interpolate(item, environ) for key, item in value.items()}
    if isinstance(value, list):
        return [interpolate(item, environ) for item in value]
    if not isinstance(value, str):
        return value

    def substitute(match: re.Match[str]) -> str:
        name, default = match.group(1), match.group(2)
        if name in environ:
            return environ[name]
        if default is not None:
            return default
        raise ConfigError(f"Environment variable {name} is not set and has no default")

    return _VARIABLE.sub(substitute, value)


def _set_dotted(document: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = document
    for part in parents:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"Cannot override {dotted}: {part} is not a section")
    node[leaf] = value


_PATH_KEYS = (
    ("bank_path",),
    ("registry_path",),
    ("output_dir",),
    ("prompts_dir",),
    ("gateway", "cache_dir"),
    ("gateway", "mock_script"),
    ("evaluation", "mcq_path"),
    ("evaluation", "roleplay_path"),
)
_MUST_EXIST = {
    ("bank_path",),
    ("registry_path",),
    ("prompts_dir",),
    ("gateway", "mock_script"),
    ("evaluation", "mcq_path"),
    ("evaluation", "roleplay_path"),
}


def _resolve_paths(document: dict[str, Any], base: Path) -> None:
    for keys in _PATH_KEYS:
        node = document
        for key in keys[:-1]:
            node = node.get(key) if isinstance(node, dict) else None
        if not isinstance(node, dict) or node.get(keys[-1]) in (None, ""):
            continue
        path = Path(os.path.expanduser(str(node[keys[-1]])))
        node[keys[-1]] = str(path if path.is_absolute() else base / path)


def _check_paths(config: RunConfig) -> None:
    for keys in sorted(_MUST_EXIST):
        value: Any = config
        for key in keys:
            value = getattr(value, key)
        if value is not None and not Path(value).exists():
            raise ConfigError(f"{'.'.join(keys)} points at a missing path: {value}")


def load_config(
    path: str | os.PathLike[str],
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Read, interpolate, override and validate a run configuration.

    Override keys are dotted (``gateway.concurrency``); relative override paths
    resolve against the working directory, file paths against the file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"No such config file: {path}")
    load_dotenv(path.parent / ".env")
    load_dotenv()

    try:
        with path.open(encoding="utf-8") as handle:
            raw = yaml.safe_load(handle) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    document = interpolate(raw)
    _resolve_paths(document, path.parent.resolve())

    if overrides:
        patch: dict[str, Any] = {}
        for dotted, value in overrides.items():
            if value is not None:
                _set_dotted(patch, dotted, value)
        _resolve_paths(patch, Path.cwd())
        for dotted, value in overrides.items():
            if value is not None:
                node: Any = patch
                for part in dotted.split("."):
                    node = node[part]
                _set_dotted(document, dotted, node)

    try:
        config = RunConfig.model_validate(document)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(f"{json_pointer(first['loc'])}: {first['msg']}") from exc

    _check_paths(config)
    if config.seed is None and config.randomized:
        raise ConfigError("seed is required when multi-turn generation, win-rate or consistency is enabled")

    _LOGGER.debug(
        "Loaded config %s:\n%s",
        path,
        json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True),
    )
    return config
