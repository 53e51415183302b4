"""Stage orchestration: segment -> reformat -> cycle -> filter -> export.

Each stage reads its inputs from the previous stage's on-disk artifacts,
so a resumed run picks up exactly where it stopped regardless of what was
in memory. The manifest is saved after every stage transition.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional

from . import corpus as corpus_mod
from .backends import DIRECTION_FORWARD
from .config import RunConfig, build_backend, build_encoder, build_trainer, config_from_dict
from .cycle import CycleConfig, FinalDataset, final_handles, read_pairs, run_cycles
from .filtering import filter_dataset, write_filter_outputs
from .ioutils import ensure_dir, write_json, write_jsonl
from .manifest import STAGES, ManifestError, RunManifest
from .prompts import PromptRegistry
from .reformat import read_standardized, reformat_corpus, write_failures, write_standardized

log = logging.getLogger(__name__)


class RunError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


def _artifacts_under(root: Path) -> List[Path]:
    return sorted(p for p in root.rglob("*") if p.is_file())


def _stage_segment(config: RunConfig, run_dir: Path,
                   registry: PromptRegistry) -> tuple[List[Path], Dict[str, int]]:
    docs = corpus_mod.load_documents(config.documents)
    seg = corpus_mod.segment_corpus(docs)
    out_dir = ensure_dir(run_dir / "corpus")
    corpus_mod.write_segmented(seg, out_dir / "segmented.jsonl")
    write_json(out_dir / "stats.json", {
        "documents": len(docs),
        "questions": seg.n_questions,
        "answers": seg.n_answers,
        "per_source": seg.stats,
    })
    counters = {"documents": len(docs), "questions": seg.n_questions,
                "answers": seg.n_answers}
    return _artifacts_under(out_dir), counters


def _stage_reformat(config: RunConfig, run_dir: Path,
                    registry: PromptRegistry) -> tuple[List[Path], Dict[str, int]]:
    seg = corpus_mod.read_segmented(run_dir / "corpus" / "segmented.jsonl")
    backend, base, _ = build_backend(config)
    std, failures = reformat_corpus(seg, base, backend, registry,
                                    params=config.generation,
                                    max_concurrency=config.max_concurrency)
    out_dir = ensure_dir(run_dir / "standardized")
    write_standardized(std, out_dir / "records.jsonl")
    if failures:
        write_failures(failures, out_dir / "failures.jsonl")
    counters = {"instructions": len(std.instructions), "responses": len(std.responses),
                "failures": len(failures), "retries": backend.retry_count}
    return _artifacts_under(out_dir), counters


def _stage_cycle(config: RunConfig, run_dir: Path,
                 registry: PromptRegistry) -> tuple[List[Path], Dict[str, int]]:
    std = read_standardized(run_dir / "standardized" / "records.jsonl")
    backend, base, _ = build_backend(config)
    trainer = build_trainer(config)
    cycle_cfg = CycleConfig(iterations=config.iterations, params=config.generation,
                            hyperparams=config.training,
                            retrain_from_base=config.retrain_from_base,
                            max_concurrency=config.max_concurrency)
    out_dir = ensure_dir(run_dir / "cycle")
    final = run_cycles(std, cycle_cfg, trainer, backend, registry, base, out_dir,
                       resume=True)
    counters = {"pairs_from_questions": final.n_from_questions,
                "pairs_from_answers": final.n_from_answers,
                "pairs_total": len(final.pairs), "retries": backend.retry_count}
    return _artifacts_under(out_dir), counters


def _stage_filter(config: RunConfig, run_dir: Path,
                  registry: PromptRegistry) -> tuple[List[Path], Dict[str, int]]:
    if not config.filter.enabled:
        return [], {"skipped": 1}
    pairs = read_pairs(run_dir / "cycle" / "final_dataset.jsonl")
    n_q = sum(1 for p in pairs if p.direction == DIRECTION_FORWARD)
    final = FinalDataset(pairs=pairs, n_from_questions=n_q,
                         n_from_answers=len(pairs) - n_q)
    fwd, bwd = final_handles(run_dir / "cycle", config.iterations)
    backend, _, _ = build_backend(config)
    encoder = build_encoder(config)
    result = filter_dataset(final, fwd, bwd, backend, registry, encoder,
                            config.filter.to_filter_config(),
                            params=config.generation,
                            max_concurrency=config.max_concurrency)
    out_dir = ensure_dir(run_dir / "filter")
    write_filter_outputs(result, out_dir)
    counters = {"pairs_in": len(final.pairs), "pairs_kept": len(result.kept),
                "unreconstructable": result.summary["n_unreconstructable"],
                "retries": backend.retry_count}
    return _artifacts_under(out_dir), counters


def _stage_export(config: RunConfig, run_dir: Path,
                  registry: PromptRegistry) -> tuple[List[Path], Dict[str, int]]:
    source = (run_dir / "filter" / "d_cycle.jsonl" if config.filter.enabled
              else run_dir / "cycle" / "final_dataset.jsonl")
    pairs = read_pairs(source)
    out_dir = ensure_dir(run_dir / "export")
    write_jsonl(out_dir / "sft_dataset.jsonl",
                ({"instruction": p.instruction, "response": p.response} for p in pairs))
    return _artifacts_under(out_dir), {"examples": len(pairs)}


_STAGE_FNS = {
    "segment": _stage_segment,
    "reformat": _stage_reformat,
    "cycle": _stage_cycle,
    "filter": _stage_filter,
    "export": _stage_export,
}


def _execute(config: RunConfig, manifest: RunManifest, run_dir: Path) -> RunManifest:
    registry = PromptRegistry.load(config.templates_dir)
    for name in STAGES:
        if manifest.is_done(name):
            log.info("stage %s already done, skipping", name)
            continue
        manifest.start_stage(name)
        manifest.save(run_dir)
        try:
            artifacts, counters = _STAGE_FNS[name](config, run_dir, registry)
        except Exception as exc:
            manifest.fail_stage(name, f"{type(exc).__name__}: {exc}")
            manifest.save(run_dir)
            raise RunError(name, str(exc)) from exc
        manifest.finish_stage(name, run_dir, artifacts, counters)
        manifest.save(run_dir)
        log.info("stage %s done: %s", name, counters)
    return manifest


def run(config: RunConfig) -> RunManifest:
    """Execute the full pipeline into config.run_dir.

    Refuses to start over an existing manifest; use resume for that.
    """
    if not config.documents:
        raise RunError("segment", "config.documents is not set")
    if not config.run_dir:
        raise RunError("segment", "config.run_dir is not set")
    run_dir = ensure_dir(config.run_dir)
    if (run_dir / "manifest.json").exists():
        raise RunError("segment", f"{run_dir} already holds a run; use resume")
    registry = PromptRegistry.load(config.templates_dir)
    manifest = RunManifest.new(config.effective_run_id, config.snapshot(),
                               registry.body_hashes())
    manifest.save(run_dir)
    return _execute(config, manifest, run_dir)


def run_stage(stage: str, run_dir: str | Path,
              config: Optional[RunConfig] = None) -> RunManifest:
    """Execute one stage against a run directory.

    An existing manifest supplies the config snapshot (an explicit config
    wins); without a manifest one is created, which requires a config.
    Fails if any earlier stage is not done. Re-running a done stage
    recomputes it.
    """
    if stage not in _STAGE_FNS:
        raise RunError(stage, f"unknown stage; expected one of {list(STAGES)}")
    run_dir = ensure_dir(run_dir)
    try:
        manifest = RunManifest.load(run_dir)
        if config is None:
            config = config_from_dict(manifest.config_snapshot)
            config.run_dir = str(run_dir)
            config.run_id = manifest.run_id
    except ManifestError:
        if config is None:
            raise RunError(stage, "no manifest in run dir and no config given")
        registry = PromptRegistry.load(config.templates_dir)
        manifest = RunManifest.new(config.effective_run_id, config.snapshot(),
                                   registry.body_hashes())
    missing = [s for s in STAGES[:STAGES.index(stage)] if not manifest.is_done(s)]
    if missing:
        raise RunError(stage, f"earlier stages not done: {missing}")
    registry = PromptRegistry.load(config.templates_dir)
    manifest.start_stage(stage)
    manifest.save(run_dir)
    try:
        artifacts, counters = _STAGE_FNS[stage](config, run_dir, registry)
    except Exception as exc:
        manifest.fail_stage(stage, f"{type(exc).__name__}: {exc}")
        manifest.save(run_dir)
        raise RunError(stage, str(exc)) from exc
    manifest.finish_stage(stage, run_dir, artifacts, counters)
    manifest.save(run_dir)
    return manifest


def resume(run_dir: str | Path, config: Optional[RunConfig] = None) -> RunManifest:
    """Continue a halted run from its manifest.

    The config is restored from the manifest snapshot unless one is passed
    explicitly (which must not contradict the snapshot's seeds/paths).
    """
    run_dir = Path(run_dir)
    manifest = RunManifest.load(run_dir)
    if config is None:
        config = config_from_dict(manifest.config_snapshot)
        config.run_dir = str(run_dir)
        config.run_id = manifest.run_id
    return _execute(config, manifest, run_dir)
