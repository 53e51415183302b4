"""Command line entry: one local training job, plus error reporting."""

import json

from trainer_ref.cli import main
from trainer_ref.registry import CheckpointRegistry


def write_dataset(path, rows):
    with path.open("w", encoding="utf-8") as fh:
        for inp, tgt in rows:
            fh.write(json.dumps({"input": inp, "target": tgt}) + "\n")


def test_train_command_saves_checkpoint(tmp_path, capsys):
    dataset = tmp_path / "rows.jsonl"
    write_dataset(dataset, [("a b c", "d"), ("e f g", "h")])
    registry_dir = tmp_path / "reg"
    code = main(["train", "--dataset", str(dataset),
                 "--registry", str(registry_dir),
                 "--job-id", "local-1", "--epochs", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert "epoch 0: loss" in out
    assert "saved m-local-1" in out
    assert CheckpointRegistry(registry_dir).exists("m-local-1")


def test_missing_dataset_reports_error(tmp_path, capsys):
    code = main(["train", "--dataset", str(tmp_path / "nope.jsonl"),
                 "--registry", str(tmp_path / "reg")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_dataset_reports_error(tmp_path, capsys):
    dataset = tmp_path / "rows.jsonl"
    dataset.write_text('{"input": "a"}\n', encoding="utf-8")
    code = main(["train", "--dataset", str(dataset),
                 "--registry", str(tmp_path / "reg")])
    assert code == 2
    assert "error:" in capsys.readouterr().err
