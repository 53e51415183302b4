"""A deliberately small causal transformer.

Big enough to memorize toy datasets and exercise a real SFT loop, small
enough that CPU tests run in seconds. The output head is untied so that the
adapter wrapper can target it; with all base weights frozen, a tied head
would cap the achievable confidence (logits bounded by the tiny embedding
scale). Linear projections get distinct attribute names for targeting.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .tokenizer import VOCAB_SIZE


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 128
    max_seq: int = 256
    vocab_size: int = VOCAB_SIZE

    def __post_init__(self):
        if self.dim % self.n_heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by n_heads {self.n_heads}")

    def to_record(self) -> dict:
        return asdict(self)


class Block(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.n_heads = config.n_heads
        self.ln_attn = nn.LayerNorm(config.dim)
        self.q_proj = nn.Linear(config.dim, config.dim)
        self.k_proj = nn.Linear(config.dim, config.dim)
        self.v_proj = nn.Linear(config.dim, config.dim)
        self.o_proj = nn.Linear(config.dim, config.dim)
        self.ln_mlp = nn.LayerNorm(config.dim)
        self.fc_in = nn.Linear(config.dim, config.ffn_dim)
        self.fc_out = nn.Linear(config.ffn_dim, config.dim)

    def _attend(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        h = self.n_heads

        def split(proj):
            return proj(x).view(b, t, h, d // h).transpose(1, 2)

        out = F.scaled_dot_product_attention(split(self.q_proj), split(self.k_proj),
                                             split(self.v_proj), is_causal=True)
        return self.o_proj(out.transpose(1, 2).reshape(b, t, d))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self._attend(self.ln_attn(x))
        return x + self.fc_out(F.gelu(self.fc_in(self.ln_mlp(x))))


class TinyCausalLM(nn.Module):
    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        torch.manual_seed(seed)
        self.tok_emb = nn.Embedding(config.vocab_size, config.dim)
        self.pos_emb = nn.Embedding(config.max_seq, config.dim)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.ln_out = nn.LayerNorm(config.dim)
        self.head = nn.Linear(config.dim, config.vocab_size, bias=False)
        for p in self.parameters():
            if p.dim() >= 2:
                nn.init.normal_(p, std=0.02)
        # Residual-branch outputs shrink with depth to keep early logits flat.
        for block in self.blocks:
            for proj in (block.o_proj, block.fc_out):
                nn.init.normal_(proj.weight, std=0.02 / math.sqrt(2 * config.n_layers))

    def hidden_states(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.shape[1] > self.config.max_seq:
            raise ValueError(f"sequence length {ids.shape[1]} exceeds max_seq "
                             f"{self.config.max_seq}")
        pos = torch.arange(ids.shape[1], device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)[None, :, :]
        for block in self.blocks:
            x = block(x)
        return self.ln_out(x)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        return self.head(self.hidden_states(ids))

    @torch.no_grad()
    def embed_text_ids(self, ids: torch.Tensor) -> torch.Tensor:
        """Mean-pooled hidden states; the serving embedding endpoint."""
        return self.hidden_states(ids).mean(dim=1)
