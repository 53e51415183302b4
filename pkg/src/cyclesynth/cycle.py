"""Four-step dual self-training loop.

Each iteration: (1) the forward model writes pseudo-responses for gold
instructions, (2) those pairs train the backward model to reconstruct the
gold instruction, (3) the freshly trained backward model writes
pseudo-instructions for gold responses, (4) those pairs train the forward
model to reconstruct the gold response. After the final iteration the
step-1 and step-3 pairs are merged into the synthetic dataset.

Steps are a strict sequential barrier; generation inside a step is
parallel. Every intermediate artifact is persisted per iteration so a
halted run can resume.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .backends import (
    DIRECTION_BACKWARD,
    DIRECTION_FORWARD,
    GenerationBackend,
    GenerationParams,
    ModelHandle,
    generate_many,
)
from .ioutils import ensure_dir, iter_jsonl, read_json, write_json, write_jsonl
from .prompts import PromptRegistry
from .reformat import KIND_INSTRUCTION, KIND_RESPONSE, Record, StandardizedCorpus
from .training import SftExample, TrainerClient, TrainingError, TrainingHyperparams, TrainingJobSpec

log = logging.getLogger(__name__)

GOLD_INSTRUCTION = "instruction"
GOLD_RESPONSE = "response"

_DIR_TAG = {DIRECTION_FORWARD: "fwd", DIRECTION_BACKWARD: "bwd"}
_TAG_DIR = {v: k for k, v in _DIR_TAG.items()}


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class PseudoPair:
    """One synthetic pair: exactly one side is gold, the other model-written."""

    pair_id: str
    instruction: str
    response: str
    gold_side: str  # instruction | response
    iteration: int
    direction: str  # forward: response is pseudo; backward: instruction is pseudo
    gold_record_id: str

    def __post_init__(self):
        if self.gold_side not in (GOLD_INSTRUCTION, GOLD_RESPONSE):
            raise CycleError(f"bad gold_side {self.gold_side!r}")
        expected = DIRECTION_FORWARD if self.gold_side == GOLD_INSTRUCTION else DIRECTION_BACKWARD
        if self.direction != expected:
            raise CycleError(
                f"pair {self.pair_id!r}: direction {self.direction!r} inconsistent "
                f"with gold_side {self.gold_side!r}"
            )

    @property
    def gold_text(self) -> str:
        return self.instruction if self.gold_side == GOLD_INSTRUCTION else self.response

    @property
    def pseudo_text(self) -> str:
        return self.response if self.gold_side == GOLD_INSTRUCTION else self.instruction

    def to_record(self) -> dict:
        return {
            "instruction": self.instruction,
            "response": self.response,
            "gold_side": self.gold_side,
            "iteration": self.iteration,
            "direction": self.direction,
            "pair_id": self.pair_id,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PseudoPair":
        tag, _it, record_id = rec["pair_id"].split(":", 2)
        return cls(
            pair_id=rec["pair_id"],
            instruction=rec["instruction"],
            response=rec["response"],
            gold_side=rec["gold_side"],
            iteration=int(rec["iteration"]),
            direction=rec.get("direction", _TAG_DIR[tag]),
            gold_record_id=record_id,
        )


def make_pair_id(direction: str, iteration: int, gold_record_id: str) -> str:
    return f"{_DIR_TAG[direction]}:{iteration:02d}:{gold_record_id}"


@dataclass
class CycleConfig:
    iterations: int = 1
    params: GenerationParams = field(default_factory=GenerationParams)
    hyperparams: TrainingHyperparams = field(default_factory=TrainingHyperparams)
    retrain_from_base: bool = True  # else continue from the previous iteration's weights
    max_concurrency: int = 8

    def __post_init__(self):
        if self.iterations < 1:
            raise CycleError(f"iterations must be >= 1, got {self.iterations}")


@dataclass
class FinalDataset:
    pairs: List[PseudoPair]
    n_from_questions: int
    n_from_answers: int

    def __post_init__(self):
        ids = [p.pair_id for p in self.pairs]
        if len(ids) != len(set(ids)):
            raise CycleError("pair_ids in final dataset are not unique")


@dataclass(frozen=True)
class GenerationFailureRecord:
    record_id: str
    step: int
    error: str

    def to_record(self) -> dict:
        return {"record_id": self.record_id, "step": self.step, "error": self.error}


def _generate_pairs(records: Sequence[Record], handle: ModelHandle,
                    backend: GenerationBackend, registry: PromptRegistry,
                    params: GenerationParams, iteration: int, step: int,
                    template_id: str, slot: str, gold_side: str, direction: str,
                    max_concurrency: int) -> Tuple[List[PseudoPair], List[GenerationFailureRecord]]:
    prompts = [registry.render(template_id, {slot: rec.text}) for rec in records]
    results = generate_many(backend, handle, prompts, params,
                            max_concurrency=max_concurrency,
                            item_ids=[rec.record_id for rec in records])
    pairs: List[PseudoPair] = []
    failures: List[GenerationFailureRecord] = []
    for rec, (text, error) in zip(records, results):
        if error is not None or text is None or not text.strip():
            reason = str(error) if error is not None else "blank completion"
            failures.append(GenerationFailureRecord(rec.record_id, step, reason))
            continue
        pair_id = make_pair_id(direction, iteration, rec.record_id)
        if gold_side == GOLD_INSTRUCTION:
            pair = PseudoPair(pair_id, rec.text, text, GOLD_INSTRUCTION,
                              iteration, direction, rec.record_id)
        else:
            pair = PseudoPair(pair_id, text, rec.text, GOLD_RESPONSE,
                              iteration, direction, rec.record_id)
        pairs.append(pair)
    pairs.sort(key=lambda p: p.pair_id)
    return pairs, failures


def step1_pseudo_answers(d_q: Sequence[Record], fwd: ModelHandle,
                         backend: GenerationBackend, registry: PromptRegistry,
                         params: GenerationParams, iteration: int = 1,
                         max_concurrency: int = 8) -> Tuple[List[PseudoPair], List[GenerationFailureRecord]]:
    """Generate a pseudo-response for every gold instruction."""
    if fwd.direction != DIRECTION_FORWARD:
        raise CycleError(f"step 1 requires a forward handle, got {fwd.direction!r}")
    bad = [r.record_id for r in d_q if r.kind != KIND_INSTRUCTION]
    if bad:
        raise CycleError(f"step 1 requires instruction records, got other kinds for {bad[:3]}")
    return _generate_pairs(d_q, fwd, backend, registry, params, iteration, 1,
                           "pseudo_answer", "instruction", GOLD_INSTRUCTION,
                           DIRECTION_FORWARD, max_concurrency)


def step2_emit_backward_training(pairs: Sequence[PseudoPair],
                                 hyperparams: TrainingHyperparams,
                                 base_handle: ModelHandle, job_id: str,
                                 registry: PromptRegistry) -> TrainingJobSpec:
    """Pairs from step 1 become SFT examples reconstructing the gold instruction.

    Input is the pseudo-response framed by the pseudo-instruction prompt
    (whitespace-trimmed); target is the gold instruction verbatim.
    """
    _validate_emission(pairs, GOLD_INSTRUCTION)
    examples = [
        SftExample(
            input=registry.render("pseudo_instruction", {"output": p.response.strip()}).text,
            target=p.instruction,
        )
        for p in pairs
    ]
    return TrainingJobSpec(job_id=job_id, direction=DIRECTION_BACKWARD,
                           examples=examples, hyperparams=hyperparams,
                           base_handle=base_handle)


def step3_pseudo_instructions(d_a: Sequence[Record], bwd: ModelHandle,
                              backend: GenerationBackend, registry: PromptRegistry,
                              params: GenerationParams, iteration: int = 1,
                              max_concurrency: int = 8) -> Tuple[List[PseudoPair], List[GenerationFailureRecord]]:
    """Generate a pseudo-instruction for every gold response."""
    if bwd.direction != DIRECTION_BACKWARD:
        raise CycleError(f"step 3 requires a backward handle, got {bwd.direction!r}")
    bad = [r.record_id for r in d_a if r.kind != KIND_RESPONSE]
    if bad:
        raise CycleError(f"step 3 requires response records, got other kinds for {bad[:3]}")
    return _generate_pairs(d_a, bwd, backend, registry, params, iteration, 3,
                           "pseudo_instruction", "output", GOLD_RESPONSE,
                           DIRECTION_BACKWARD, max_concurrency)


def step4_emit_forward_training(pairs: Sequence[PseudoPair],
                                hyperparams: TrainingHyperparams,
                                base_handle: ModelHandle, job_id: str,
                                registry: PromptRegistry) -> TrainingJobSpec:
    """Pairs from step 3 become SFT examples reconstructing the gold response."""
    _validate_emission(pairs, GOLD_RESPONSE)
    examples = [
        SftExample(
            input=registry.render("pseudo_answer", {"instruction": p.instruction.strip()}).text,
            target=p.response,
        )
        for p in pairs
    ]
    return TrainingJobSpec(job_id=job_id, direction=DIRECTION_FORWARD,
                           examples=examples, hyperparams=hyperparams,
                           base_handle=base_handle)


def _validate_emission(pairs: Sequence[PseudoPair], gold_side: str) -> None:
    if not pairs:
        raise TrainingError("empty training set")
    mixed = [p.pair_id for p in pairs if p.gold_side != gold_side]
    if mixed:
        raise CycleError(f"mixed gold_side in training emission: {mixed[:3]}")
    ids = [p.pair_id for p in pairs]
    if len(ids) != len(set(ids)):
        raise CycleError("duplicate pair_ids in training emission")


def write_pairs(pairs: Sequence[PseudoPair], path: str | Path) -> int:
    return write_jsonl(path, (p.to_record() for p in pairs))


def read_pairs(path: str | Path) -> List[PseudoPair]:
    return [PseudoPair.from_record(rec) for rec in iter_jsonl(path)]


def run_cycles(std: StandardizedCorpus, config: CycleConfig, trainer: TrainerClient,
               backend: GenerationBackend, registry: PromptRegistry,
               base_handle: ModelHandle, run_dir: str | Path,
               resume: bool = False) -> FinalDataset:
    """Execute the four-step loop for the configured number of iterations.

    Per-iteration artifacts land in {run_dir}/iter_XX/; the merged dataset
    of the final iteration is written to {run_dir}/final_dataset.jsonl.
    With resume=True, iterations whose handles.json exists are replayed
    from disk instead of regenerated.
    """
    run_dir = ensure_dir(run_dir)
    fwd = base_handle.with_direction(DIRECTION_FORWARD)
    bwd = base_handle.with_direction(DIRECTION_BACKWARD)
    fwd_base = fwd
    bwd_base = bwd

    pairs1: List[PseudoPair] = []
    pairs3: List[PseudoPair] = []
    for iteration in range(1, config.iterations + 1):
        iter_dir = ensure_dir(run_dir / f"iter_{iteration:02d}")
        handles_path = iter_dir / "handles.json"
        if resume and handles_path.is_file():
            pairs1 = read_pairs(iter_dir / "pairs_step1.jsonl")
            pairs3 = read_pairs(iter_dir / "pairs_step3.jsonl")
            handles = read_json(handles_path)
            fwd = ModelHandle.from_record(handles["forward"])
            bwd = ModelHandle.from_record(handles["backward"])
            log.info("iteration %d restored from %s", iteration, iter_dir)
            continue

        pairs1, failures1 = step1_pseudo_answers(
            std.instructions, fwd, backend, registry, config.params,
            iteration=iteration, max_concurrency=config.max_concurrency)
        write_pairs(pairs1, iter_dir / "pairs_step1.jsonl")
        if failures1:
            write_jsonl(iter_dir / "failures_step1.jsonl", (f.to_record() for f in failures1))

        bwd_init = bwd_base if config.retrain_from_base else bwd
        job_b = step2_emit_backward_training(
            pairs1, config.hyperparams, bwd_init,
            job_id=f"job-bwd-{iteration:02d}", registry=registry)
        job_b.write_dataset(iter_dir / "sft_backward.jsonl")
        write_json(iter_dir / "job_backward.json", job_b.to_record("sft_backward.jsonl"))
        bwd = trainer.submit(job_b)

        pairs3, failures3 = step3_pseudo_instructions(
            std.responses, bwd, backend, registry, config.params,
            iteration=iteration, max_concurrency=config.max_concurrency)
        write_pairs(pairs3, iter_dir / "pairs_step3.jsonl")
        if failures3:
            write_jsonl(iter_dir / "failures_step3.jsonl", (f.to_record() for f in failures3))

        fwd_init = fwd_base if config.retrain_from_base else fwd
        job_f = step4_emit_forward_training(
            pairs3, config.hyperparams, fwd_init,
            job_id=f"job-fwd-{iteration:02d}", registry=registry)
        job_f.write_dataset(iter_dir / "sft_forward.jsonl")
        write_json(iter_dir / "job_forward.json", job_f.to_record("sft_forward.jsonl"))
        fwd = trainer.submit(job_f)

        write_json(handles_path, {"forward": fwd.to_record(), "backward": bwd.to_record()})
        log.info("iteration %d: %d question-side pairs, %d answer-side pairs",
                 iteration, len(pairs1), len(pairs3))

    final = FinalDataset(pairs=pairs1 + pairs3,
                         n_from_questions=len(pairs1), n_from_answers=len(pairs3))
    write_pairs(final.pairs, run_dir / "final_dataset.jsonl")
    return final


def final_handles(run_dir: str | Path, iterations: int) -> Tuple[ModelHandle, ModelHandle]:
    """(forward, backward) handles of the last completed iteration."""
    handles = read_json(Path(run_dir) / f"iter_{iterations:02d}" / "handles.json")
    return ModelHandle.from_record(handles["forward"]), ModelHandle.from_record(handles["backward"])
