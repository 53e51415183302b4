"""Segmentation fixtures and an independent splitting oracle.

The twelve-document corpus mixes half-width and full-width question
marks, blank-line variants (plain, whitespace-only, NBSP, runs), leading
and trailing blanks, and indentation. Expected counts are derived by hand
in the comments; the oracle re-derives paragraphs with a regex instead of
a line scan.
"""

import re
from typing import List

import numpy as np

from cyclesynth.corpus import RawDocument

# doc_id, text, hand-counted (questions, answers)
TWELVE_DOCS = [
    ("doc01", "Is the water potable?", (1, 0)),
    ("doc02", "The well water is filtered twice.", (0, 1)),
    ("doc03", "How deep is the well?\n\nIt reaches forty meters.\n\nWhere does runoff go?",
     (2, 1)),
    ("doc04", "入场需要预约吗？\n\n需要提前一天。", (1, 1)),
    ("doc05", "First block line one.\nFirst block line two.\n   \t\nSecond block?\n", (1, 1)),
    ("doc06", "Alpha paragraph.\n\n\n\nBeta paragraph?", (1, 1)),
    ("doc07", "\n\nGamma?\n\n", (1, 0)),
    ("doc08", "The guide asks, what next? Then explains.", (1, 0)),
    ("doc09", "pack the kit\ncheck the seals", (0, 1)),
    ("doc10", "Half ? and full ？ in one line\n\nsecond line plain", (1, 1)),
    ("doc11", "Résumé tips here.\n \nDoes NBSP split?", (1, 1)),
    ("doc12", "  Indented start line\n  continued line  \n\n  Final?  ", (1, 1)),
]

EXPECTED_QUESTIONS = sum(q for _, _, (q, _a) in TWELVE_DOCS)  # 11
EXPECTED_ANSWERS = sum(a for _, _, (_q, a) in TWELVE_DOCS)  # 9


def twelve_documents() -> List[RawDocument]:
    return [RawDocument(doc_id=doc_id, text=text, source="twelve")
            for doc_id, text, _counts in TWELVE_DOCS]


# A paragraph is a run of lines that each contain at least one non-space
# character; runs are found directly with a multiline regex rather than by
# scanning lines, so this is an independent derivation.
_PARA_RUN = re.compile(r"(?m)^[^\n]*\S[^\n]*(?:\n[^\n]*\S[^\n]*)*")
_ANY_QMARK = re.compile(r"[?？]")


def oracle_split(text: str) -> List[str]:
    return [m.group(0).strip() for m in _PARA_RUN.finditer(text)]


def oracle_role(passage: str) -> str:
    return "question" if _ANY_QMARK.search(passage) else "answer"


_FUZZ_ATOMS = [
    "a", "b", "cat", "?", "？", " ", "\t", "\n", "\n\n", " \n", " \n",
    "é", "。", ".", "x y", "¿", "　", "end.\n",
]


def fuzz_documents(n: int, seed: int = 0) -> List[RawDocument]:
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n):
        length = int(rng.integers(0, 40))
        atoms = rng.integers(0, len(_FUZZ_ATOMS), size=length)
        text = "".join(_FUZZ_ATOMS[int(k)] for k in atoms)
        docs.append(RawDocument(doc_id=f"fuzz{i:06d}", text=text, source="fuzz"))
    return docs
