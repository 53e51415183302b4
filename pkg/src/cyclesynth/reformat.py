"""Rewrite raw passages into standardized instruction/response records.

Question passages go through the prompter rewrite, answer passages through
the assistant rewrite. Per-passage failures are recorded in a sidecar,
never fatal; quality control beyond non-emptiness is left to the filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .backends import (
    BackendError,
    GenerationBackend,
    GenerationParams,
    ModelHandle,
    generate_many,
)
from .corpus import Passage, SegmentedCorpus
from .ioutils import iter_jsonl, write_jsonl
from .prompts import PromptRegistry

KIND_INSTRUCTION = "instruction"
KIND_RESPONSE = "response"


@dataclass(frozen=True)
class Record:
    record_id: str
    kind: str  # instruction | response
    text: str
    raw_text: str
    source: str = ""

    def to_record(self) -> dict:
        return {
            "record_id": self.record_id,
            "kind": self.kind,
            "text": self.text,
            "raw_text": self.raw_text,
            "source": self.source,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Record":
        return cls(rec["record_id"], rec["kind"], rec["text"],
                   rec.get("raw_text", ""), rec.get("source", ""))


@dataclass(frozen=True)
class ReformatFailure:
    passage_id: str
    kind: str
    error: str

    def to_record(self) -> dict:
        return {"passage_id": self.passage_id, "kind": self.kind, "error": self.error}


@dataclass
class StandardizedCorpus:
    instructions: List[Record] = field(default_factory=list)
    responses: List[Record] = field(default_factory=list)

    def __post_init__(self):
        ids = [r.record_id for r in self.instructions] + [r.record_id for r in self.responses]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate record_ids in standardized corpus")


def _reformat(passages: Sequence[Passage], template_id: str, slot: str, kind: str,
              model: ModelHandle, backend: GenerationBackend, registry: PromptRegistry,
              params: GenerationParams,
              max_concurrency: int = 8) -> Tuple[List[Record], List[ReformatFailure]]:
    prompts = [registry.render(template_id, {slot: p.text}) for p in passages]
    results = generate_many(backend, model, prompts, params,
                            max_concurrency=max_concurrency,
                            item_ids=[p.passage_id for p in passages])
    records: List[Record] = []
    failures: List[ReformatFailure] = []
    for passage, (text, error) in zip(passages, results):
        if error is not None or not text or not text.strip():
            reason = str(error) if error is not None else "empty rewrite"
            failures.append(ReformatFailure(passage.passage_id, kind, reason))
            continue
        records.append(Record(
            record_id=passage.passage_id,
            kind=kind,
            text=text,
            raw_text=passage.text,
            source=passage.source,
        ))
    records.sort(key=lambda r: r.record_id)
    failures.sort(key=lambda f: f.passage_id)
    return records, failures


def reformat_questions(corpus: SegmentedCorpus, model: ModelHandle,
                       backend: GenerationBackend, registry: PromptRegistry,
                       params: Optional[GenerationParams] = None,
                       max_concurrency: int = 8) -> Tuple[List[Record], List[ReformatFailure]]:
    """Rewrite every question passage into one self-contained instruction."""
    return _reformat(corpus.questions, "reformat_prompter", "instruction",
                     KIND_INSTRUCTION, model, backend, registry,
                     params or GenerationParams(), max_concurrency)


def reformat_answers(corpus: SegmentedCorpus, model: ModelHandle,
                     backend: GenerationBackend, registry: PromptRegistry,
                     params: Optional[GenerationParams] = None,
                     max_concurrency: int = 8) -> Tuple[List[Record], List[ReformatFailure]]:
    """Polish every answer passage into a coherent response paragraph."""
    return _reformat(corpus.answers, "reformat_assistant", "output",
                     KIND_RESPONSE, model, backend, registry,
                     params or GenerationParams(), max_concurrency)


def reformat_corpus(corpus: SegmentedCorpus, model: ModelHandle,
                    backend: GenerationBackend, registry: PromptRegistry,
                    params: Optional[GenerationParams] = None,
                    max_concurrency: int = 8) -> Tuple[StandardizedCorpus, List[ReformatFailure]]:
    instructions, fail_q = reformat_questions(corpus, model, backend, registry,
                                              params, max_concurrency)
    responses, fail_a = reformat_answers(corpus, model, backend, registry,
                                         params, max_concurrency)
    return StandardizedCorpus(instructions=instructions, responses=responses), fail_q + fail_a


def write_standardized(std: StandardizedCorpus, path: str | Path) -> int:
    records = [r.to_record() for r in std.instructions] + [r.to_record() for r in std.responses]
    return write_jsonl(path, records)


def write_failures(failures: Sequence[ReformatFailure], path: str | Path) -> int:
    return write_jsonl(path, (f.to_record() for f in failures))


def read_standardized(path: str | Path) -> StandardizedCorpus:
    instructions: List[Record] = []
    responses: List[Record] = []
    for rec in iter_jsonl(path):
        record = Record.from_record(rec)
        if record.kind == KIND_INSTRUCTION:
            instructions.append(record)
        elif record.kind == KIND_RESPONSE:
            responses.append(record)
        else:
            raise ValueError(f"{path}: unknown record kind {record.kind!r}")
    return StandardizedCorpus(instructions=instructions, responses=responses)
