"""Versioned prompt catalog.

Each template file holds the instruction text, a ``%%% inputs %%%`` separator
and an input scaffold.  Placeholders are ``{{name}}`` (required) or
``{{name?}}`` (optional, empty when unbound).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

__all__ = ["MissingBinding", "PromptTemplate", "TemplateId", "catalog_version", "get_template", "render_prompt"]

_SEPARATOR = "\n%%% inputs %%%\n"
_PLACEHOLDER = re.compile(r"\{\{(\w+)(\?)?\}\}")


class TemplateId(str, Enum):
    COMPLEXITY_FILTER = "complexity_filter"
    TEXT_SYNTHESIS = "text_synthesis"
    METADATA_SYNTHESIS = "metadata_synthesis"
    PREFERENCE_JUDGE = "preference_judge"
    RANKER = "ranker"
    CODER = "coder"
    JUDGE = "judge"
    GENERIC = "generic"


class MissingBinding(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"missing prompt binding {self.name!r}"


@dataclass(frozen=True)
class PromptTemplate:
    id: TemplateId
    instruction: str
    scaffold: str

    @property
    def body(self) -> str:
        if not self.instruction:
            return self.scaffold
        return self.instruction + "\n\n" + self.scaffold

    @property
    def required_bindings(self) -> frozenset[str]:
        return frozenset(m.group(1) for m in _PLACEHOLDER.finditer(self.body) if not m.group(2))

    @property
    def optional_bindings(self) -> frozenset[str]:
        return frozenset(m.group(1) for m in _PLACEHOLDER.finditer(self.body) if m.group(2))

    def render(self, bindings: dict[str, str]) -> str:
        def substitute(m: re.Match) -> str:
            name, optional = m.group(1), m.group(2)
            if name in bindings:
                return str(bindings[name])
            if optional:
                return ""
            raise MissingBinding(name)

        missing = sorted(self.required_bindings - set(bindings))
        if missing:
            raise MissingBinding(missing[0])
        return _PLACEHOLDER.sub(substitute, self.body)


def _read(name: str) -> str:
    return resources.files("infochart").joinpath("prompts", name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def _catalog() -> dict:
    return json.loads(_read("catalog.json"))


def catalog_version() -> str:
    return str(_catalog()["version"])


@lru_cache(maxsize=None)
def get_template(template_id: TemplateId | str) -> PromptTemplate:
    tid = TemplateId(template_id)
    text = _read(_catalog()["templates"][tid.value])
    if _SEPARATOR in text:
        instruction, scaffold = text.split(_SEPARATOR, 1)
    else:
        instruction, scaffold = "", text
    return PromptTemplate(tid, instruction, scaffold)


def render_prompt(template_id: TemplateId | str, bindings: dict[str, str]) -> str:
    """Substitute ``bindings`` into the catalog template; byte-stable for equal inputs."""
    return get_template(template_id).render(bindings)
