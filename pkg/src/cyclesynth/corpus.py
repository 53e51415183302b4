"""Raw-document segmentation into question-like and answer-like passages.

Documents are split into paragraphs on runs of blank lines; a paragraph is
question-like iff it contains a half-width "?" or full-width "？". No seed
data or learned classifier is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

from .ioutils import iter_jsonl, write_jsonl

ROLE_QUESTION = "question"
ROLE_ANSWER = "answer"

# Half-width and full-width question marks; applied uniformly to all sources.
QUESTION_MARKS = ("?", "？")


class CorpusError(ValueError):
    """Raised on malformed corpus input (duplicate ids, bad records)."""


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    text: str
    source: str = ""


@dataclass(frozen=True)
class Passage:
    passage_id: str
    text: str
    role: str  # ROLE_QUESTION or ROLE_ANSWER
    source: str = ""

    def to_record(self) -> Dict[str, str]:
        return {
            "passage_id": self.passage_id,
            "role": self.role,
            "text": self.text,
            "source": self.source,
        }


@dataclass
class SegmentedCorpus:
    questions: List[Passage] = field(default_factory=list)
    answers: List[Passage] = field(default_factory=list)
    # per-source counts: source -> {"questions": n, "answers": n}
    stats: Dict[str, Dict[str, int]] = field(default_factory=dict)

    @property
    def n_questions(self) -> int:
        return len(self.questions)

    @property
    def n_answers(self) -> int:
        return len(self.answers)


def split_paragraphs(doc: RawDocument) -> List[Tuple[str, str]]:
    """Split a document into (passage_id, text) tuples, one per paragraph.

    A blank line is a line whose content is empty after Unicode whitespace
    trimming; paragraphs are maximal runs of non-blank lines. Each paragraph
    is trimmed of leading/trailing whitespace (interior whitespace kept
    verbatim) and empty paragraphs are dropped. Ordinals follow document
    order and are zero-padded for stable joins downstream.
    """
    paragraphs: List[str] = []
    current: List[str] = []
    for line in doc.text.split("\n"):
        if line.strip():
            current.append(line)
        elif current:
            paragraphs.append("\n".join(current))
            current = []
    if current:
        paragraphs.append("\n".join(current))

    out: List[Tuple[str, str]] = []
    ordinal = 0
    for para in paragraphs:
        trimmed = para.strip()
        if not trimmed:
            continue
        out.append((f"{doc.doc_id}#{ordinal:04d}", trimmed))
        ordinal += 1
    return out


def classify_passage(text: str) -> str:
    """Question iff the text contains at least one question mark (either width)."""
    if not text:
        raise CorpusError("cannot classify empty passage text")
    if any(mark in text for mark in QUESTION_MARKS):
        return ROLE_QUESTION
    return ROLE_ANSWER


def segment_corpus(docs: Iterable[RawDocument]) -> SegmentedCorpus:
    """Segment documents and partition every paragraph into questions/answers.

    Document order is preserved in both output lists. Duplicate doc_ids are
    rejected; per-source counts are accumulated in corpus.stats.
    """
    corpus = SegmentedCorpus()
    seen_ids: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen_ids:
            raise CorpusError(f"duplicate doc_id: {doc.doc_id!r}")
        seen_ids.add(doc.doc_id)
        for passage_id, text in split_paragraphs(doc):
            role = classify_passage(text)
            passage = Passage(passage_id=passage_id, text=text, role=role, source=doc.source)
            bucket = corpus.stats.setdefault(doc.source, {"questions": 0, "answers": 0})
            if role == ROLE_QUESTION:
                corpus.questions.append(passage)
                bucket["questions"] += 1
            else:
                corpus.answers.append(passage)
                bucket["answers"] += 1
    return corpus


def load_documents_jsonl(path: str | Path) -> List[RawDocument]:
    """One document per line: {"doc_id": ..., "text": ..., "source": ...}."""
    docs: List[RawDocument] = []
    for rec in iter_jsonl(path):
        try:
            doc = RawDocument(
                doc_id=str(rec["doc_id"]),
                text=str(rec["text"]),
                source=str(rec.get("source", "")),
            )
        except KeyError as exc:
            raise CorpusError(f"{path}: document record missing field {exc}") from exc
        if not doc.text.strip():
            raise CorpusError(f"{path}: document {doc.doc_id!r} has empty text")
        docs.append(doc)
    return docs


def load_documents_dir(path: str | Path, source: str = "") -> List[RawDocument]:
    """Directory of plain-text files; the filename (sans extension) is the doc_id."""
    root = Path(path)
    docs: List[RawDocument] = []
    for file in sorted(root.iterdir()):
        if not file.is_file():
            continue
        text = file.read_text(encoding="utf-8")
        docs.append(RawDocument(doc_id=file.stem, text=text, source=source or root.name))
    return docs


def load_documents(path: str | Path, source: str = "") -> List[RawDocument]:
    path = Path(path)
    if path.is_dir():
        return load_documents_dir(path, source=source)
    return load_documents_jsonl(path)


def write_segmented(corpus: SegmentedCorpus, path: str | Path) -> int:
    """Write all passages, questions then answers, one JSON object per line."""
    records = [p.to_record() for p in corpus.questions]
    records += [p.to_record() for p in corpus.answers]
    return write_jsonl(path, records)


def read_segmented(path: str | Path) -> SegmentedCorpus:
    corpus = SegmentedCorpus()
    for rec in iter_jsonl(path):
        passage = Passage(
            passage_id=rec["passage_id"],
            text=rec["text"],
            role=rec["role"],
            source=rec.get("source", ""),
        )
        bucket = corpus.stats.setdefault(passage.source, {"questions": 0, "answers": 0})
        if passage.role == ROLE_QUESTION:
            corpus.questions.append(passage)
            bucket["questions"] += 1
        elif passage.role == ROLE_ANSWER:
            corpus.answers.append(passage)
            bucket["answers"] += 1
        else:
            raise CorpusError(f"{path}: unknown role {passage.role!r}")
    return corpus
