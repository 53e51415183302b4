"""Shared fixtures: mock stack, corpus builders, canary bindings."""

import json
from pathlib import Path

import pytest

from cyclesynth.backends import DIRECTION_BASE, GenerationParams, ModelHandle
from cyclesynth.mock import HashedBigramEncoder, MockBackend
from cyclesynth.prompts import PromptRegistry
from cyclesynth.training import MockTrainer

GOLDEN_DIR = Path(__file__).parent / "goldens"

# Bindings used by the prompt-fidelity goldens.
CANARY_BINDINGS = {
    "reformat_prompter": {
        "instruction": "Which lever opens the spillway gate?\n\nAnd why is it painted red?",
    },
    "reformat_assistant": {
        "output": "The spillway gate opens with the long lever. It is painted red for visibility.",
    },
    "pseudo_answer": {"instruction": "Qr[Which lever opens the spillway gate?]"},
    "pseudo_instruction": {"output": "A[The gate opens with the lever.]"},
    "qa_judge": {"answer": "Use the red lever.", "question": "How do I open the gate?"},
}


@pytest.fixture(scope="session")
def registry() -> PromptRegistry:
    return PromptRegistry.load()


@pytest.fixture()
def backend() -> MockBackend:
    return MockBackend()


@pytest.fixture()
def encoder() -> HashedBigramEncoder:
    return HashedBigramEncoder(dim=64)


@pytest.fixture()
def trainer() -> MockTrainer:
    return MockTrainer()


@pytest.fixture()
def base_handle() -> ModelHandle:
    return ModelHandle(handle_id="base", direction=DIRECTION_BASE)


@pytest.fixture()
def params() -> GenerationParams:
    return GenerationParams(seed=0)


def make_documents(n_questions: int, n_answers: int):
    """Raw documents that segment into exactly the requested counts, one
    passage per document."""
    from cyclesynth.corpus import RawDocument

    docs = []
    for i in range(n_questions):
        docs.append(RawDocument(doc_id=f"q{i:04d}",
                                text=f"How should fixture item {i} be stored?",
                                source="fixture"))
    for j in range(n_answers):
        docs.append(RawDocument(doc_id=f"a{j:04d}",
                                text=f"Fixture item {j} keeps best in a cool dry place.",
                                source="fixture"))
    return docs


def write_documents_jsonl(path: Path, docs) -> Path:
    rows = [{"doc_id": d.doc_id, "text": d.text, "source": d.source} for d in docs]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path
