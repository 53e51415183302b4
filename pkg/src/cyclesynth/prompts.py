"""Registry of the five fixed prompt templates with byte-exact rendering.

Templates are plain-text data files shipped with the package (overridable
via a directory path), each with a one-line front matter naming its slots:

    slots: answer, question
    ---
    <body with {{answer}} and {{question}} markers>

The stored file ends with a single trailing newline that is not part of
the prompt body. Rendering is verbatim substitution: no escaping, no
trimming of binding values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Mapping, Tuple

TEMPLATE_IDS = (
    "reformat_prompter",
    "reformat_assistant",
    "pseudo_answer",
    "pseudo_instruction",
    "qa_judge",
)

_SLOT_MARKER = re.compile(r"\{\{([^{}]*)\}\}")


class TemplateError(ValueError):
    """Raised for malformed template files or bad render requests."""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    slots: Tuple[str, ...]

    def validate(self) -> None:
        """Each declared slot must appear exactly once; no stray markers."""
        found = _SLOT_MARKER.findall(self.body)
        for slot in self.slots:
            count = found.count(slot)
            if count != 1:
                raise TemplateError(
                    f"template {self.template_id!r}: slot {slot!r} occurs {count} times, expected 1"
                )
        undeclared = [name for name in found if name not in self.slots]
        if undeclared:
            raise TemplateError(
                f"template {self.template_id!r}: undeclared slot markers {undeclared}"
            )


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    text: str
    bindings: Mapping[str, str]


def parse_template_file(template_id: str, raw: str) -> PromptTemplate:
    newline_ok = "\r" not in raw
    if not newline_ok:
        raise TemplateError(f"template {template_id!r}: CR characters not allowed (LF only)")
    header, sep, body = raw.partition("\n---\n")
    if not sep:
        raise TemplateError(f"template {template_id!r}: missing 'slots:' front matter separator")
    header = header.strip()
    if not header.startswith("slots:"):
        raise TemplateError(f"template {template_id!r}: front matter must start with 'slots:'")
    slots = tuple(s.strip() for s in header[len("slots:"):].split(",") if s.strip())
    if not slots:
        raise TemplateError(f"template {template_id!r}: no slots declared")
    if body.endswith("\n"):
        body = body[:-1]
    template = PromptTemplate(template_id=template_id, body=body, slots=slots)
    template.validate()
    return template


class PromptRegistry:
    """Immutable template registry; rendering is a pure function of it."""

    def __init__(self, templates: Dict[str, PromptTemplate]):
        missing = [tid for tid in TEMPLATE_IDS if tid not in templates]
        if missing:
            raise TemplateError(f"missing templates: {missing}")
        self._templates = dict(templates)

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "PromptRegistry":
        """Load templates from a directory, or from the packaged defaults."""
        templates: Dict[str, PromptTemplate] = {}
        if directory is None:
            pkg = resources.files("cyclesynth.templates")
            for tid in TEMPLATE_IDS:
                raw = (pkg / f"{tid}.txt").read_text(encoding="utf-8")
                templates[tid] = parse_template_file(tid, raw)
        else:
            directory = Path(directory)
            for tid in TEMPLATE_IDS:
                path = directory / f"{tid}.txt"
                if not path.is_file():
                    raise TemplateError(f"template file not found: {path}")
                templates[tid] = parse_template_file(tid, path.read_text(encoding="utf-8"))
        return cls(templates)

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise TemplateError(f"unknown template_id: {template_id!r}") from None

    def render(self, template_id: str, bindings: Mapping[str, str]) -> RenderedPrompt:
        """Byte-exact slot substitution.

        Bindings must cover exactly the declared slots and be non-empty;
        values are inserted verbatim.
        """
        template = self.get(template_id)
        expected = set(template.slots)
        got = set(bindings)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise TemplateError(
                f"template {template_id!r}: bad bindings (missing={missing}, extra={extra})"
            )
        for slot, value in bindings.items():
            if not value:
                raise TemplateError(f"template {template_id!r}: empty binding for slot {slot!r}")
        text = template.body
        for slot in template.slots:
            text = text.replace("{{" + slot + "}}", bindings[slot])
        return RenderedPrompt(template_id=template_id, text=text, bindings=dict(bindings))

    def body_hashes(self) -> Dict[str, str]:
        from .ioutils import sha256_text

        return {tid: sha256_text(self._templates[tid].body) for tid in sorted(self._templates)}
