"""Hand-rolled low-rank adapters.

The wrapped linear keeps its base weight frozen; only the A/B factors
train. B starts at zero, so a freshly adapted model computes exactly what
the base model does. Serving never merges: the wrapper stays in place.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Tuple

import torch
import torch.nn as nn

DEFAULT_TARGETS = ("q_proj", "v_proj", "fc_in", "fc_out", "head")


class LoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: float, dropout: float):
        super().__init__()
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        base.weight.requires_grad_(False)
        if base.bias is not None:
            base.bias.requires_grad_(False)
        self.base = base
        self.lora_a = nn.Parameter(torch.randn(rank, base.in_features) * 0.02)
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        self.scale = alpha / rank
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        delta = (self.dropout(x) @ self.lora_a.T) @ self.lora_b.T
        return self.base(x) + delta * self.scale


def apply_lora(model: nn.Module, rank: int, alpha: float, dropout: float,
               targets: Iterable[str] = DEFAULT_TARGETS) -> List[str]:
    """Wrap every targeted nn.Linear in place; freezes everything else.

    Returns the qualified names that were wrapped (deterministic order).
    """
    targets = set(targets)
    for p in model.parameters():
        p.requires_grad_(False)
    wrapped: List[str] = []
    for module_name, module in model.named_modules():
        for attr in sorted(targets):
            child = getattr(module, attr, None)
            if isinstance(child, nn.Linear):
                setattr(module, attr, LoRALinear(child, rank, alpha, dropout))
                wrapped.append(f"{module_name}.{attr}" if module_name else attr)
    if not wrapped:
        raise ValueError(f"no linear layers matched targets {sorted(targets)}")
    return wrapped


def adapter_parameters(model: nn.Module) -> List[nn.Parameter]:
    return [p for p in model.parameters() if p.requires_grad]


def adapter_state(model: nn.Module) -> Dict[str, torch.Tensor]:
    """Only the A/B factors, keyed by qualified parameter name."""
    return {name: tensor.detach().clone()
            for name, tensor in model.state_dict().items()
            if ".lora_a" in name or ".lora_b" in name}


def load_adapter_state(model: nn.Module, state: Dict[str, torch.Tensor]) -> None:
    own = {name for name, _ in model.named_parameters()
           if ".lora_a" in name or ".lora_b" in name}
    if own != set(state):
        missing = sorted(own ^ set(state))
        raise ValueError(f"adapter state does not match model: {missing}")
    model.load_state_dict(state, strict=False)
