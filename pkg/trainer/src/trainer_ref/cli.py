"""Command line entry points: serve the API or run one local job."""

import argparse
import json
import sys
from pathlib import Path

from .model import ModelConfig, TinyCausalLM
from .lora import adapter_state, apply_lora
from .registry import CheckpointRegistry
from .sft import SftError, TrainerHyperparams, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainer-ref",
                                     description="Reference LoRA SFT trainer service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--registry", default="./checkpoints")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8410)
    p_serve.add_argument("--base-seed", type=int, default=0)
    p_serve.add_argument("--dim", type=int, default=64)
    p_serve.add_argument("--layers", type=int, default=2)

    p_train = sub.add_parser("train", help="train one job from a local jsonl file")
    p_train.add_argument("--dataset", required=True, help="jsonl of {input, target}")
    p_train.add_argument("--registry", default="./checkpoints")
    p_train.add_argument("--job-id", default="local")
    p_train.add_argument("--direction", default="forward")
    p_train.add_argument("--epochs", type=int, default=3)
    p_train.add_argument("--learning-rate", type=float, default=1e-3)
    p_train.add_argument("--base-seed", type=int, default=0)
    return parser


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = ModelConfig(dim=args.dim, n_layers=args.layers)
    app = create_app(args.registry, config, base_seed=args.base_seed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_train(args) -> int:
    rows = []
    with Path(args.dataset).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                rows.append((rec["input"], rec["target"]))
    hp = TrainerHyperparams(epochs=args.epochs, learning_rate=args.learning_rate)
    model = TinyCausalLM(ModelConfig(), seed=args.base_seed)
    apply_lora(model, rank=hp.lora_rank, alpha=hp.lora_alpha, dropout=hp.lora_dropout)
    result = train(model, rows, hp, seed=args.base_seed,
                   log=lambda epoch, loss: print(f"epoch {epoch}: loss {loss:.4f}"))
    model_id = f"m-{args.job_id}"
    registry = CheckpointRegistry(args.registry)
    registry.save(model_id, adapter_state(model), model.config, args.base_seed,
                  meta={"job_id": args.job_id, "direction": args.direction,
                        "lora_rank": hp.lora_rank, "lora_alpha": hp.lora_alpha,
                        "parent": "base"})
    print(f"saved {model_id} ({result.n_truncated} truncated examples)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        return _cmd_train(args)
    except (SftError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
