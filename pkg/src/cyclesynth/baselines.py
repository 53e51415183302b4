"""Back-translation baselines built on seed pairs.

The comparison pipelines: pick a labeled seed subset (uniformly or by
cluster representatives), train an inverse model on it, write pseudo
questions for the unlabeled answers, and emit the resulting forward SFT
set. Generation and training go through the same contracts the cycle
engine uses, so runs differ only in where the data comes from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .backends import Encoder, GenerationBackend, GenerationParams, ModelHandle
from .clustering import kmeans, nearest_to_centroid
from .cycle import (
    GenerationFailureRecord,
    PseudoPair,
    step3_pseudo_instructions,
    step4_emit_forward_training,
)
from .ioutils import ensure_dir, iter_jsonl, write_json, write_jsonl
from .prompts import PromptRegistry
from .reformat import Record
from .training import SftExample, TrainingHyperparams, TrainingJobSpec

METHOD_RANDOM = "random"
METHOD_CLUSTER = "cluster"


class BaselineError(ValueError):
    pass


@dataclass(frozen=True)
class GoldPair:
    pair_id: str
    question: str
    answer: str

    def to_record(self) -> dict:
        return {"pair_id": self.pair_id, "question": self.question, "answer": self.answer}

    @classmethod
    def from_record(cls, rec: dict, fallback_id: str) -> "GoldPair":
        return cls(pair_id=str(rec.get("pair_id", fallback_id)),
                   question=rec["question"], answer=rec["answer"])


@dataclass
class SeedSet:
    pairs: List[GoldPair]
    selection: str
    fraction: float
    rng_seed: int
    n_gold: int

    def __post_init__(self):
        ids = [p.pair_id for p in self.pairs]
        if len(ids) != len(set(ids)):
            raise BaselineError("duplicate pair_ids in seed set")

    @property
    def meta(self) -> dict:
        return {
            "selection": self.selection,
            "fraction": self.fraction,
            "rng_seed": self.rng_seed,
            "n_gold": self.n_gold,
            "n_selected": len(self.pairs),
        }


def seed_count(n_gold: int, fraction: float) -> int:
    """Half-up rounding so e.g. 5% of 10 is 1, not banker's-rounded 0."""
    return int(math.floor(n_gold * fraction + 0.5))


def sample_seed(gold: Sequence[GoldPair], method: str, fraction: float, rng_seed: int,
                encoder: Optional[Encoder] = None, n_init: int = 10) -> SeedSet:
    """Select round(fraction * |gold|) seed pairs.

    random: uniform without replacement. cluster: k-means over answer
    embeddings with k equal to the target count, one representative per
    cluster (nearest to centroid); should a cluster come out empty, the
    shortfall is filled with the lowest-index unselected pairs.
    """
    if not gold:
        raise BaselineError("gold corpus is empty")
    if not (0.0 < fraction <= 1.0):
        raise BaselineError(f"fraction must be in (0, 1], got {fraction}")
    target = seed_count(len(gold), fraction)
    if target < 1:
        raise BaselineError(f"fraction {fraction} of {len(gold)} pairs selects nothing")

    if method == METHOD_RANDOM:
        rng = np.random.default_rng(rng_seed)
        idx = sorted(int(i) for i in rng.choice(len(gold), size=target, replace=False))
    elif method == METHOD_CLUSTER:
        if encoder is None:
            raise BaselineError("cluster selection requires an encoder")
        mat = encoder.embed_matrix([p.answer for p in gold])
        model = kmeans(mat, target, seed=rng_seed, n_init=n_init)
        chosen = set(nearest_to_centroid(model, mat).values())
        for i in range(len(gold)):
            if len(chosen) >= target:
                break
            chosen.add(i)
        idx = sorted(chosen)
    else:
        raise BaselineError(f"unknown selection method {method!r}")

    return SeedSet(pairs=[gold[i] for i in idx], selection=method,
                   fraction=fraction, rng_seed=rng_seed, n_gold=len(gold))


def emit_inverse_training(seed: SeedSet, hyperparams: TrainingHyperparams,
                          base_handle: ModelHandle, job_id: str,
                          registry: PromptRegistry) -> TrainingJobSpec:
    """Answer-to-question SFT on the seed pairs (the inverse model)."""
    if not seed.pairs:
        raise BaselineError("empty seed set")
    examples = [
        SftExample(
            input=registry.render("pseudo_instruction", {"output": p.answer.strip()}).text,
            target=p.question,
        )
        for p in seed.pairs
    ]
    return TrainingJobSpec(job_id=job_id, direction="backward", examples=examples,
                           hyperparams=hyperparams, base_handle=base_handle)


def generate_pseudo_questions(d_a: Sequence[Record], inv: ModelHandle,
                              backend: GenerationBackend, registry: PromptRegistry,
                              params: GenerationParams, max_concurrency: int = 8,
                              ) -> Tuple[List[PseudoPair], List[GenerationFailureRecord]]:
    """One pseudo question per unlabeled answer (iteration tag 0)."""
    return step3_pseudo_instructions(d_a, inv, backend, registry, params,
                                     iteration=0, max_concurrency=max_concurrency)


def emit_bt_training(pairs: Sequence[PseudoPair], hyperparams: TrainingHyperparams,
                     base_handle: ModelHandle, job_id: str,
                     registry: PromptRegistry) -> TrainingJobSpec:
    """Forward SFT on (pseudo question, gold answer) pairs."""
    return step4_emit_forward_training(pairs, hyperparams, base_handle, job_id, registry)


def write_seed_set(seed: SeedSet, out_dir: str | Path) -> None:
    out_dir = ensure_dir(out_dir)
    write_jsonl(out_dir / "seed_set.jsonl", (p.to_record() for p in seed.pairs))
    write_json(out_dir / "seed_set.meta.json", seed.meta)


def load_gold_pairs(path: str | Path) -> List[GoldPair]:
    return [GoldPair.from_record(rec, fallback_id=f"gold-{i:06d}")
            for i, rec in enumerate(iter_jsonl(path))]
