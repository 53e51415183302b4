"""Command-line surface.

Stage commands (segment, reformat, cycle, filter) operate on a run
directory through the same manifest machinery as full runs, so mixing
`run`, `resume`, and single stages is safe. baseline, judge, and
correlate are standalone utilities over explicit files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from .backends import DIRECTION_BACKWARD
from .baselines import (
    emit_bt_training,
    emit_inverse_training,
    generate_pseudo_questions,
    load_gold_pairs,
    sample_seed,
    write_seed_set,
)
from .config import ConfigError, RunConfig, build_backend, build_encoder, build_trainer, load_config
from .cycle import read_pairs, write_pairs
from .evalkit import build_report, judge_pairs, load_scores, write_correlation_report, write_judge_outputs
from .ioutils import ensure_dir, write_jsonl
from .manifest import RunManifest
from .prompts import PromptRegistry
from .reformat import KIND_RESPONSE, Record, read_standardized
from .runner import RunError, resume, run, run_stage

log = logging.getLogger(__name__)

STAGE_COMMANDS = ("segment", "reformat", "cycle", "filter")


def _parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value
    return out


def _load_config(args: argparse.Namespace) -> Optional[RunConfig]:
    overrides = _parse_overrides(getattr(args, "set", None))
    for flag in ("documents", "run_dir"):
        value = getattr(args, flag, None)
        if value:
            overrides[flag] = value
    if getattr(args, "config", None) is None and not overrides:
        return None
    return load_config(getattr(args, "config", None), overrides)


def _add_config_flags(parser: argparse.ArgumentParser, with_run_dir: bool = True) -> None:
    parser.add_argument("--config", help="YAML/JSON config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted config override, e.g. filter.k_clusters=100")
    if with_run_dir:
        parser.add_argument("--run-dir", dest="run_dir", help="run directory")


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if config is None:
        raise ConfigError("run requires --config or overrides")
    manifest = run(config)
    print(f"run {manifest.run_id} complete: "
          f"{manifest.stage('export').counters.get('examples', 0)} examples exported")
    return 0


def _cmd_resume(args: argparse.Namespace) -> int:
    manifest = resume(args.run_dir, _load_config_optional(args))
    print(f"run {manifest.run_id} resumed to completion")
    return 0


def _load_config_optional(args: argparse.Namespace) -> Optional[RunConfig]:
    if getattr(args, "config", None) is None and not getattr(args, "set", None):
        return None
    overrides = _parse_overrides(getattr(args, "set", None))
    return load_config(args.config, overrides)


def _cmd_stage(stage: str, args: argparse.Namespace) -> int:
    if not args.run_dir:
        raise ConfigError(f"{stage} requires --run-dir")
    manifest = run_stage(stage, args.run_dir, _load_config(args))
    counters = manifest.stage(stage).counters
    print(f"stage {stage} done: {counters}")
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    config = _load_config(args) or RunConfig()
    gold = load_gold_pairs(args.gold)
    encoder = build_encoder(config) if args.method == "cluster" else None
    seed_set = sample_seed(gold, args.method, args.fraction, args.seed, encoder=encoder)
    out_dir = ensure_dir(args.out)
    write_seed_set(seed_set, out_dir)
    print(f"selected {len(seed_set.pairs)}/{len(gold)} seed pairs ({args.method})")

    registry = PromptRegistry.load(config.templates_dir)
    backend, base, _ = build_backend(config)
    trainer = build_trainer(config)
    job = emit_inverse_training(seed_set, config.training,
                                base.with_direction(DIRECTION_BACKWARD),
                                job_id="job-bt-inverse", registry=registry)
    job.write_dataset(out_dir / "inverse_dataset.jsonl")
    inv = trainer.submit(job)

    if args.answers:
        d_a = read_standardized(args.answers).responses
    else:
        # Without a separate unlabeled pool, back-translate the gold answers.
        d_a = [Record(record_id=p.pair_id, kind=KIND_RESPONSE, text=p.answer,
                      raw_text=p.answer, source="gold") for p in seed_set.pairs]
    pairs, failures = generate_pseudo_questions(d_a, inv, backend, registry,
                                                config.generation,
                                                max_concurrency=config.max_concurrency)
    write_pairs(pairs, out_dir / "pseudo_questions.jsonl")
    if failures:
        write_jsonl(out_dir / "failures.jsonl", (f.to_record() for f in failures))
    bt_job = emit_bt_training(pairs, config.training, base.with_direction("forward"),
                              job_id="job-bt-forward", registry=registry)
    bt_job.write_dataset(out_dir / "bt_dataset.jsonl")
    print(f"bt dataset: {len(pairs)} pairs ({len(failures)} failures) -> {out_dir}")
    return 0


def _cmd_judge(args: argparse.Namespace) -> int:
    config = _load_config(args) or RunConfig()
    pairs = read_pairs(args.dataset)
    registry = PromptRegistry.load(config.templates_dir)
    backend, _, judge = build_backend(config)
    summary = judge_pairs(pairs, judge, backend, registry, params=config.generation,
                          sample_n=args.sample_n, rng_seed=args.seed,
                          max_concurrency=config.max_concurrency)
    write_judge_outputs(summary, args.out)
    mean = "n/a" if summary.mean is None else f"{summary.mean:.3f}"
    flag = " [FLAGGED: >10% parse failures]" if summary.flagged else ""
    print(f"judged {summary.n_sampled} pairs: mean {mean}, "
          f"{len(summary.failures)} failures{flag}")
    return 0


def _cmd_correlate(args: argparse.Namespace) -> int:
    quality = load_scores(args.quality)
    perf = load_scores(args.scores)
    report = build_report(quality, perf)
    write_correlation_report(report, args.out)
    print(f"n={report.n} methods: r={report.r:.4f}, p={report.p:.5f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclesynth",
        description="Seed-free instruction-tuning data synthesis pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the full pipeline")
    _add_config_flags(p_run)
    p_run.add_argument("--documents", help="input documents (jsonl file or directory)")

    p_resume = sub.add_parser("resume", help="continue a halted run")
    p_resume.add_argument("--run-dir", dest="run_dir", required=True)
    p_resume.add_argument("--config")
    p_resume.add_argument("--set", action="append", metavar="KEY=VALUE")

    for stage in STAGE_COMMANDS:
        p_stage = sub.add_parser(stage, help=f"run only the {stage} stage")
        _add_config_flags(p_stage)
        if stage == "segment":
            p_stage.add_argument("--documents", help="input documents")

    p_base = sub.add_parser("baseline", help="back-translation baseline from gold seeds")
    _add_config_flags(p_base, with_run_dir=False)
    p_base.add_argument("--gold", required=True, help="gold pairs jsonl (question/answer)")
    p_base.add_argument("--method", choices=["random", "cluster"], required=True)
    p_base.add_argument("--fraction", type=float, required=True)
    p_base.add_argument("--answers", help="standardized records jsonl for the unlabeled pool")
    p_base.add_argument("--seed", type=int, default=0)
    p_base.add_argument("--out", required=True)

    p_judge = sub.add_parser("judge", help="score synthetic pairs with a judge model")
    _add_config_flags(p_judge, with_run_dir=False)
    p_judge.add_argument("--dataset", required=True, help="pairs jsonl to judge")
    p_judge.add_argument("--sample-n", dest="sample_n", type=int, default=500)
    p_judge.add_argument("--seed", type=int, default=0)
    p_judge.add_argument("--out", required=True)

    p_corr = sub.add_parser("correlate", help="quality vs performance correlation")
    p_corr.add_argument("--quality", required=True, help="method -> mean quality file")
    p_corr.add_argument("--scores", required=True, help="method -> metric file")
    p_corr.add_argument("--out", required=True)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - min(args.verbose, 2) * 10
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "resume":
            return _cmd_resume(args)
        if args.command in STAGE_COMMANDS:
            return _cmd_stage(args.command, args)
        if args.command == "baseline":
            return _cmd_baseline(args)
        if args.command == "judge":
            return _cmd_judge(args)
        if args.command == "correlate":
            return _cmd_correlate(args)
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, RunError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
