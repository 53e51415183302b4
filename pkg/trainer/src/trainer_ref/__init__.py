"""Reference trainer service: real low-rank-adapter SFT on a tiny causal
language model, behind the training-job / chat-completion / embedding wire
protocol. Single process, CPU-friendly; throughput is a non-goal."""

from .model import ModelConfig, TinyCausalLM
from .sft import TrainerHyperparams, TrainResult, train

__all__ = ["ModelConfig", "TinyCausalLM", "TrainerHyperparams", "TrainResult", "train"]
