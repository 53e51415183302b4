"""Masked-NLL supervised fine-tuning.

Each example becomes BOS + input bytes + target bytes + EOS. The loss is
the negative log-likelihood of the target tokens (EOS included) given
everything before them; input positions are masked out of the loss.
Sequences over cutoff_len lose input bytes from the left first, so the
target always survives when it fits at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from . import tokenizer
from .lora import adapter_parameters
from .model import TinyCausalLM

IGNORE = -100
SCHEDULES = ("cosine", "constant")


class SftError(ValueError):
    pass


@dataclass(frozen=True)
class TrainerHyperparams:
    """Mirrors the wire names; validated against documented ranges."""

    lora_rank: int = 8
    lora_alpha: int = 16
    lora_dropout: float = 0.05
    learning_rate: float = 1e-4
    lr_schedule: str = "cosine"
    micro_batch: int = 4
    effective_batch: int = 32
    cutoff_len: int = 1024
    epochs: int = 3

    def __post_init__(self):
        checks = [
            (1 <= self.lora_rank <= 256, f"lora_rank out of range: {self.lora_rank}"),
            (self.lora_alpha > 0, f"lora_alpha must be positive: {self.lora_alpha}"),
            (0.0 <= self.lora_dropout < 1.0, f"lora_dropout out of range: {self.lora_dropout}"),
            (0.0 < self.learning_rate <= 1.0, f"learning_rate out of range: {self.learning_rate}"),
            (self.lr_schedule in SCHEDULES, f"lr_schedule must be one of {SCHEDULES}"),
            (self.micro_batch >= 1, f"micro_batch must be >= 1: {self.micro_batch}"),
            (self.effective_batch >= self.micro_batch,
             f"effective_batch {self.effective_batch} < micro_batch {self.micro_batch}"),
            (self.cutoff_len >= 8, f"cutoff_len too small: {self.cutoff_len}"),
            (1 <= self.epochs <= 1000, f"epochs out of range: {self.epochs}"),
        ]
        for ok, message in checks:
            if not ok:
                raise SftError(message)

    @classmethod
    def from_record(cls, rec: Dict) -> "TrainerHyperparams":
        unknown = set(rec) - set(cls.__dataclass_fields__)
        if unknown:
            raise SftError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**rec)


@dataclass
class EncodedExample:
    ids: List[int]
    labels: List[int]
    truncated: bool


def encode_example(input_text: str, target_text: str, cutoff_len: int) -> EncodedExample:
    inp = tokenizer.encode(input_text)
    tgt = tokenizer.encode(target_text)
    overflow = (1 + len(inp) + len(tgt) + 1) - cutoff_len
    truncated = overflow > 0
    if overflow > 0:
        drop = min(overflow, len(inp))
        inp = inp[drop:]
        overflow -= drop
    if overflow > 0:
        # Input is gone and the target alone still overflows; keep its head.
        tgt = tgt[:len(tgt) - overflow]
    if not tgt:
        raise SftError("target empty after truncation; raise cutoff_len")
    ids = [tokenizer.BOS_ID] + inp + tgt + [tokenizer.EOS_ID]
    labels = [IGNORE] * (1 + len(inp)) + tgt + [tokenizer.EOS_ID]
    return EncodedExample(ids=ids, labels=labels, truncated=truncated)


def encode_dataset(rows: Sequence[Tuple[str, str]], cutoff_len: int
                   ) -> Tuple[List[EncodedExample], int]:
    if not rows:
        raise SftError("empty training set")
    encoded = [encode_example(inp, tgt, cutoff_len) for inp, tgt in rows]
    return encoded, sum(1 for ex in encoded if ex.truncated)


def _pad_batch(batch: Sequence[EncodedExample]) -> Tuple[torch.Tensor, torch.Tensor]:
    width = max(len(ex.ids) for ex in batch)
    ids = torch.full((len(batch), width), tokenizer.PAD_ID, dtype=torch.long)
    labels = torch.full((len(batch), width), IGNORE, dtype=torch.long)
    for row, ex in enumerate(batch):
        ids[row, :len(ex.ids)] = torch.tensor(ex.ids, dtype=torch.long)
        labels[row, :len(ex.labels)] = torch.tensor(ex.labels, dtype=torch.long)
    return ids, labels


def masked_nll(model: TinyCausalLM, ids: torch.Tensor, labels: torch.Tensor
               ) -> Tuple[torch.Tensor, int]:
    """Mean NLL over supervised positions plus how many there were.

    Next-token shift: position t predicts t+1, so the last logit column and
    the first label column fall away.
    """
    logits = model(ids)[:, :-1, :]
    shifted = labels[:, 1:]
    n_tokens = int((shifted != IGNORE).sum())
    loss = F.cross_entropy(logits.reshape(-1, logits.shape[-1]),
                           shifted.reshape(-1), ignore_index=IGNORE)
    return loss, n_tokens


@dataclass
class TrainResult:
    loss_curve: List[float] = field(default_factory=list)
    n_truncated: int = 0
    optimizer_steps: int = 0


def train(model: TinyCausalLM, rows: Sequence[Tuple[str, str]],
          hp: TrainerHyperparams, seed: int = 0,
          log: Optional[callable] = None) -> TrainResult:
    """Fine-tune the model's adapter parameters in place.

    loss_curve holds one mean NLL per epoch (token-weighted over the
    epoch's updates), so its length always equals hp.epochs.
    """
    cutoff = min(hp.cutoff_len, model.config.max_seq)
    encoded, n_truncated = encode_dataset(rows, cutoff)

    params = adapter_parameters(model)
    if not params:
        raise SftError("model has no trainable adapter parameters")
    optimizer = torch.optim.AdamW(params, lr=hp.learning_rate)
    accum = max(1, hp.effective_batch // hp.micro_batch)
    batches_per_epoch = math.ceil(len(encoded) / hp.micro_batch)
    total_steps = max(1, math.ceil(batches_per_epoch / accum) * hp.epochs)

    generator = torch.Generator().manual_seed(seed)
    result = TrainResult(n_truncated=n_truncated)
    model.train()
    for epoch in range(hp.epochs):
        order = torch.randperm(len(encoded), generator=generator).tolist()
        epoch_loss, epoch_tokens = 0.0, 0
        optimizer.zero_grad()
        since_step = 0
        for start in range(0, len(order), hp.micro_batch):
            batch = [encoded[i] for i in order[start:start + hp.micro_batch]]
            ids, labels = _pad_batch(batch)
            loss, n_tokens = masked_nll(model, ids, labels)
            (loss / accum).backward()
            epoch_loss += float(loss.detach()) * n_tokens
            epoch_tokens += n_tokens
            since_step += 1
            if since_step == accum or start + hp.micro_batch >= len(order):
                if hp.lr_schedule == "cosine":
                    progress = result.optimizer_steps / total_steps
                    scale = 0.5 * (1.0 + math.cos(math.pi * progress))
                    for group in optimizer.param_groups:
                        group["lr"] = hp.learning_rate * scale
                optimizer.step()
                optimizer.zero_grad()
                result.optimizer_steps += 1
                since_step = 0
        mean = epoch_loss / max(1, epoch_tokens)
        result.loss_curve.append(mean)
        if log is not None:
            log(epoch, mean)
    model.eval()
    return result
