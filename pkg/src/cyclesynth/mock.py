"""Deterministic mock backend, encoders and trainer for desk-scale runs.

The mock generation rules are exact inverses of each other, so a full
pipeline run realizes perfect cycle consistency:

* forward (pseudo-answer) rule:   q  -> "A[" + q + "]"
* backward (pseudo-instruction):  "A[x]" -> x, anything else a -> "Q[" + a + "]"
* reformat rules: question q -> "Qr[" + q + "]", answer a -> "Ar[" + a + "]"
* judge rule: stable integer score in [0, 10] hashed from the pair

Hence backward(forward(q)) == q byte-for-byte for every q.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import kernels
from .backends import Encoder, GenerationBackend, GenerationParams, ModelHandle
from .ioutils import stable_hash_int
from .prompts import RenderedPrompt


class MockBackend(GenerationBackend):
    deterministic = True

    def estimate_tokens(self, text: str) -> int:
        return max(1, math.ceil(len(text) / 4))

    def generate(self, handle: ModelHandle, prompt: RenderedPrompt,
                 params: GenerationParams) -> str:
        bindings = prompt.bindings
        tid = prompt.template_id
        if tid == "reformat_prompter":
            return f"Qr[{bindings['instruction']}]"
        if tid == "reformat_assistant":
            return f"Ar[{bindings['output']}]"
        if tid == "pseudo_answer":
            return f"A[{bindings['instruction']}]"
        if tid == "pseudo_instruction":
            value = bindings["output"]
            if value.startswith("A[") and value.endswith("]"):
                return value[2:-1]
            return f"Q[{value}]"
        if tid == "qa_judge":
            key = f"{bindings['question']}\x00{bindings['answer']}"
            return str(stable_hash_int(key) % 11)
        raise ValueError(f"mock backend has no rule for template {tid!r}")


class HashedBigramEncoder(Encoder):
    """Character-bigram count vectors hashed into a fixed number of buckets.

    Identical strings map to identical vectors; texts shorter than two
    characters embed to the zero vector.
    """

    def __init__(self, dim: int = 256):
        self.dim = dim
        self.encoder_id = f"mock-bigram-{dim}"

    def _embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        return kernels.bigram_counts(list(texts), self.dim)


class GaussianHashEncoder(Encoder):
    """Deterministic per-text Gaussian vectors for synthetic stress runs.

    Each text is hashed (together with the encoder seed) to its own RNG
    stream, so identical texts always embed identically while distinct
    texts land in general position.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.encoder_id = f"mock-gauss-{dim}-{seed}"

    def _embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            rng = np.random.default_rng((stable_hash_int(text), self.seed))
            out[i] = rng.standard_normal(self.dim)
        return out
