"""The training objective: masking, truncation, and actual learning."""

import pytest
import torch

from conftest import color_rows
from trainer_ref import tokenizer
from trainer_ref.lora import apply_lora
from trainer_ref.model import ModelConfig, TinyCausalLM
from trainer_ref.sft import (
    IGNORE,
    SftError,
    TrainerHyperparams,
    encode_dataset,
    encode_example,
    masked_nll,
    train,
)


def fresh(config, rank=16, alpha=32, dropout=0.0):
    model = TinyCausalLM(config, seed=0)
    apply_lora(model, rank=rank, alpha=alpha, dropout=dropout)
    return model


def test_encode_masks_input_and_supervises_target():
    ex = encode_example("ab", "xyz", cutoff_len=64)
    inp, tgt = tokenizer.encode("ab"), tokenizer.encode("xyz")
    assert ex.ids == [tokenizer.BOS_ID] + inp + tgt + [tokenizer.EOS_ID]
    assert ex.labels == [IGNORE] * 3 + tgt + [tokenizer.EOS_ID]
    assert not ex.truncated


def test_truncation_drops_input_from_the_left():
    ex = encode_example("0123456789", "XY", cutoff_len=8)
    # 1 BOS + 10 input + 2 target + 1 EOS = 14; overflow 6 comes off the input head.
    assert ex.truncated
    assert len(ex.ids) == 8
    assert tokenizer.decode(ex.ids) == "6789XY"
    assert tokenizer.decode(i for i in ex.labels if i != IGNORE) == "XY"


def test_truncation_preserves_target_until_it_cannot():
    ex = encode_example("in", "0123456789ABCDEF", cutoff_len=10)
    assert ex.truncated
    assert tokenizer.decode(i for i in ex.labels if i != IGNORE) == "01234567"
    with pytest.raises(SftError, match="cutoff_len"):
        encode_example("", "", cutoff_len=8)


def test_encode_dataset_counts_and_rejects_empty():
    encoded, n_truncated = encode_dataset([("a", "b"), ("x" * 100, "y")], cutoff_len=16)
    assert len(encoded) == 2
    assert n_truncated == 1
    with pytest.raises(SftError, match="empty"):
        encode_dataset([], cutoff_len=16)


def test_hyperparameter_validation():
    for bad in [dict(epochs=0), dict(learning_rate=0.0), dict(lora_rank=0),
                dict(lr_schedule="linear"), dict(micro_batch=8, effective_batch=4),
                dict(cutoff_len=4), dict(lora_dropout=1.0)]:
        with pytest.raises(SftError):
            TrainerHyperparams(**bad)
    with pytest.raises(SftError, match="unknown"):
        TrainerHyperparams.from_record({"batch_size": 8})


def test_masked_nll_counts_only_supervised_positions(small_config):
    model = fresh(small_config)
    ex = encode_example("abcd", "ef", cutoff_len=64)
    ids = torch.tensor([ex.ids], dtype=torch.long)
    labels = torch.tensor([ex.labels], dtype=torch.long)
    loss, n_tokens = masked_nll(model, ids, labels)
    assert n_tokens == 3  # two target bytes plus EOS
    assert loss.ndim == 0 and float(loss.detach()) > 0.0


def test_loss_decreases_across_three_epochs():
    hp = TrainerHyperparams(learning_rate=2e-2, lora_rank=16, lora_alpha=32,
                            lora_dropout=0.0, epochs=3,
                            micro_batch=8, effective_batch=8)
    model = TinyCausalLM(ModelConfig(), seed=0)
    apply_lora(model, rank=hp.lora_rank, alpha=hp.lora_alpha, dropout=hp.lora_dropout)
    result = train(model, color_rows(64), hp, seed=0)
    curve = result.loss_curve
    assert len(curve) == 3
    assert curve[0] > curve[1] > curve[2]
    assert curve[2] < curve[0]


def test_mask_polarity_sanity():
    """Constant target with varying inputs trains to near-zero loss; the
    swapped framing (constant input, varying targets) cannot."""
    hp = TrainerHyperparams(learning_rate=5e-3, lora_rank=16, lora_alpha=32,
                            lora_dropout=0.0, epochs=12,
                            micro_batch=8, effective_batch=8)
    inputs = [f"input variant number {i:03d} with padding" for i in range(32)]

    const_target = fresh(ModelConfig())
    const_curve = train(const_target, [(text, "OK") for text in inputs],
                        hp, seed=0).loss_curve
    swapped = fresh(ModelConfig())
    swapped_curve = train(swapped, [("OK", text) for text in inputs],
                          hp, seed=0).loss_curve

    assert const_curve[-1] < 0.6
    assert swapped_curve[-1] > 1.5
    assert const_curve[-1] < swapped_curve[-1] / 3


def test_training_is_deterministic(small_config):
    hp = TrainerHyperparams(learning_rate=1e-2, lora_dropout=0.0, epochs=2,
                            micro_batch=4, effective_batch=8)
    curves = []
    for _ in range(2):
        model = fresh(small_config, rank=hp.lora_rank, alpha=hp.lora_alpha)
        curves.append(train(model, color_rows(16), hp, seed=7).loss_curve)
    assert curves[0] == curves[1]


def test_truncation_count_reported(small_config):
    hp = TrainerHyperparams(learning_rate=1e-2, lora_dropout=0.0, epochs=1,
                            micro_batch=4, effective_batch=4, cutoff_len=16)
    model = fresh(small_config)
    rows = [("short", "t"), ("x" * 50, "t"), ("y" * 50, "t")]
    result = train(model, rows, hp, seed=0)
    assert result.n_truncated == 2
    assert result.optimizer_steps >= 1
