"""Checkpoint registry: one .pt file per trained adapter set.

The base model is reconstructed from its config and seed, so a checkpoint
only stores the adapter weights plus the metadata needed to rebuild and
rewrap the model identically.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List

import torch

from .lora import apply_lora, load_adapter_state
from .model import ModelConfig, TinyCausalLM


class RegistryError(KeyError):
    pass


class CheckpointRegistry:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, model_id: str) -> Path:
        if not model_id or "/" in model_id or model_id.startswith("."):
            raise RegistryError(f"bad model_id: {model_id!r}")
        return self.root / f"{model_id}.pt"

    def save(self, model_id: str, adapters: Dict[str, torch.Tensor],
             model_config: ModelConfig, base_seed: int, meta: Dict) -> Path:
        path = self._path(model_id)
        torch.save({
            "adapters": adapters,
            "model_config": model_config.to_record(),
            "base_seed": base_seed,
            "meta": meta,
        }, path)
        return path

    def exists(self, model_id: str) -> bool:
        try:
            return self._path(model_id).is_file()
        except RegistryError:
            return False

    def list_ids(self) -> List[str]:
        return sorted(p.stem for p in self.root.glob("*.pt"))

    def meta(self, model_id: str) -> Dict:
        return self._load(model_id)["meta"]

    def _load(self, model_id: str) -> Dict:
        path = self._path(model_id)
        if not path.is_file():
            raise RegistryError(f"unknown model_id: {model_id!r}")
        return torch.load(path, weights_only=True)

    def instantiate(self, model_id: str) -> TinyCausalLM:
        """Rebuild base-from-seed, rewrap, and load the stored adapters."""
        blob = self._load(model_id)
        config = ModelConfig(**blob["model_config"])
        model = TinyCausalLM(config, seed=blob["base_seed"])
        meta = blob["meta"]
        apply_lora(model, rank=meta["lora_rank"], alpha=meta["lora_alpha"], dropout=0.0)
        load_adapter_state(model, blob["adapters"])
        model.eval()
        return model
