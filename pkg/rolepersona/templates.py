"""Prompt templates: authored ``{{ slot }}`` templates and verbatim judge templates."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable

import jinja2

from .const import DIMENSIONAL_CRITERIA, PACKAGE
from .errors import TemplateSlotError


RPA_SYSTEM = "rpa_system.txt"
RPA_USER = "rpa_user.txt"
SUITABILITY = "suitability.txt"
ASSESS_ITEM = "assess_item.txt"
ASSESS_DIALOGUE = "assess_dialogue.txt"
MCQ = "mcq.txt"
WINRATE_SYSTEM = "winrate_system.txt"
WINRATE_USER = "winrate_user.txt"


def dimensional_template(criterion: str) -> str:
    if criterion not in DIMENSIONAL_CRITERIA:
        raise KeyError(criterion)
    return f"dims_{criterion}.txt"


class PromptLibrary:
    """Templates from an optional override directory, falling back to the packaged ones."""

    def __init__(self, override_dir: str | Path | None = None) -> None:
        loaders: list[jinja2.BaseLoader] = []
        if override_dir is not None:
            loaders.append(jinja2.FileSystemLoader(str(override_dir)))
        loaders.append(jinja2.PackageLoader(PACKAGE, "prompts"))
        self.override_dir = override_dir
        self.env = jinja2.Environment(
            loader=jinja2.ChoiceLoader(loaders),
            undefined=jinja2.StrictUndefined,
            autoescape=False,
        )

    def source(self, name: str) -> str:
        """Raw template text, exactly as stored."""
        text, _, _ = self.env.loader.get_source(self.env, name)
        return text

    def render(self, name: str, /, **slots: Any) -> str:
        """Render an authored template; a slot the template uses but the caller omits raises."""
        try:
            return self.env.get_template(name).render(**slots)
        except jinja2.UndefinedError as exc:
            raise TemplateSlotError(f"{name}: {exc.message}") from exc

    def format(self, name: str, /, **slots: Any) -> str:
        """Render a verbatim judge template with ``str.format``."""
        try:
            return self.source(name).format(**slots)
        except KeyError as exc:
            raise TemplateSlotError(f"{name}: missing slot {exc.args[0]!r}") from exc


def render_memory(excerpts: Iterable[Any]) -> str:
    lines = [f"- {excerpt.text}" for excerpt in excerpts]
    return "\n".join(lines) if lines else "- (none)"


def render_history(turns: Iterable[tuple[str, str]], name: str) -> str:
    """Plain-text transcript of prior turns."""
    return "\n".join(f"Interviewer: {question}\n{name}: {response}" for question, response in turns)


_DEFAULT_LIBRARY: PromptLibrary | None = None


def default_library() -> PromptLibrary:
    global _DEFAULT_LIBRARY
    if _DEFAULT_LIBRARY is None:
        _DEFAULT_LIBRARY = PromptLibrary()
    return _DEFAULT_LIBRARY
