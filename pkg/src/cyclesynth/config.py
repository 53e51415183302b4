"""Run configuration: file, environment, CLI flag layering.

Precedence, lowest to highest: dataclass defaults, config file, CLI
overrides. Secrets (API keys) are never written into configs or
manifests; they are read from the environment variables the config
names, at client-construction time.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .backends import (
    DIRECTION_BASE,
    DIRECTION_JUDGE,
    Encoder,
    GenerationBackend,
    GenerationParams,
    HTTPBackend,
    HTTPEncoder,
    ModelHandle,
)
from .filtering import FilterConfig
from .mock import GaussianHashEncoder, HashedBigramEncoder, MockBackend
from .training import HTTPTrainer, MockTrainer, TrainerClient, TrainingHyperparams


class ConfigError(ValueError):
    pass


@dataclass
class BackendSection:
    kind: str = "mock"  # mock | http
    endpoint: Optional[str] = None
    api_key_env: str = "CYCLESYNTH_API_KEY"
    base_model: str = "base"
    judge_model: Optional[str] = None  # defaults to base_model


@dataclass
class EncoderSection:
    kind: str = "bigram"  # bigram | gaussian | http
    dim: int = 256
    seed: int = 0
    endpoint: Optional[str] = None
    model: str = "embed"
    api_key_env: str = "CYCLESYNTH_API_KEY"


@dataclass
class TrainerSection:
    kind: str = "mock"  # mock | http
    endpoint: Optional[str] = None
    api_key_env: str = "CYCLESYNTH_API_KEY"
    poll_interval: float = 2.0
    poll_timeout: float = 3600.0
    inline_dataset: bool = True


@dataclass
class FilterSection:
    enabled: bool = True
    k_clusters: int = 200
    drop_fraction: float = 0.05
    kmeans_max_iters: int = 100
    rng_seed: int = 0
    pruning_mode: str = "distance_rank"
    cluster_scope: str = "joint"

    def to_filter_config(self) -> FilterConfig:
        return FilterConfig(k_clusters=self.k_clusters, drop_fraction=self.drop_fraction,
                            kmeans_max_iters=self.kmeans_max_iters, rng_seed=self.rng_seed,
                            pruning_mode=self.pruning_mode, cluster_scope=self.cluster_scope)


@dataclass
class RunConfig:
    documents: str = ""
    run_dir: str = ""
    run_id: Optional[str] = None
    iterations: int = 1
    retrain_from_base: bool = True
    max_concurrency: int = 8
    templates_dir: Optional[str] = None
    generation: GenerationParams = field(default_factory=GenerationParams)
    training: TrainingHyperparams = field(default_factory=TrainingHyperparams)
    filter: FilterSection = field(default_factory=FilterSection)
    backend: BackendSection = field(default_factory=BackendSection)
    encoder: EncoderSection = field(default_factory=EncoderSection)
    trainer: TrainerSection = field(default_factory=TrainerSection)

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.max_concurrency < 1:
            raise ConfigError(f"max_concurrency must be >= 1, got {self.max_concurrency}")

    @property
    def effective_run_id(self) -> str:
        return self.run_id or (Path(self.run_dir).name if self.run_dir else "run")

    def snapshot(self) -> dict:
        """JSON-safe copy for the manifest. Contains no secrets, and no
        run_dir/run_id: those name this particular copy of the run rather
        than its behavior, and replay comparisons rely on their absence."""
        data = asdict(self)
        data.pop("run_dir", None)
        data.pop("run_id", None)
        return data


_SECTIONS = {
    "generation": GenerationParams,
    "training": TrainingHyperparams,
    "filter": FilterSection,
    "backend": BackendSection,
    "encoder": EncoderSection,
    "trainer": TrainerSection,
}


def _build_section(cls, data: Dict[str, Any]):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    if cls is GenerationParams and isinstance(data.get("stop"), list):
        data = dict(data, stop=tuple(data["stop"]))
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    data = dict(data or {})
    kwargs: Dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        section = data.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        kwargs[name] = _build_section(cls, section)
    allowed = set(RunConfig.__dataclass_fields__) - set(_SECTIONS)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(data)
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_scalar(text: str) -> Any:
    return yaml.safe_load(text)


def apply_overrides(data: Dict[str, Any], overrides: Dict[str, str]) -> Dict[str, Any]:
    """Apply dotted-path overrides, values parsed as YAML scalars."""
    for dotted, raw in overrides.items():
        parts = dotted.split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override through non-mapping key {part!r} in {dotted!r}")
        node[parts[-1]] = _parse_scalar(raw)
    return data


def load_config(path: Optional[str | Path] = None,
                overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    data: Dict[str, Any] = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root must be a mapping: {path}")
        data = loaded
    if overrides:
        data = apply_overrides(data, overrides)
    return config_from_dict(data)


def _secret(env_name: str) -> Optional[str]:
    return os.environ.get(env_name) or None


def build_backend(config: RunConfig) -> Tuple[GenerationBackend, ModelHandle, ModelHandle]:
    """(backend, base handle, judge handle) per the backend section."""
    section = config.backend
    if section.kind == "mock":
        backend: GenerationBackend = MockBackend()
    elif section.kind == "http":
        if not section.endpoint:
            raise ConfigError("backend.kind=http requires backend.endpoint")
        backend = HTTPBackend(section.endpoint, api_key=_secret(section.api_key_env))
    else:
        raise ConfigError(f"unknown backend.kind {section.kind!r}")
    base = ModelHandle(handle_id=section.base_model, direction=DIRECTION_BASE)
    judge = ModelHandle(handle_id=section.judge_model or section.base_model,
                        direction=DIRECTION_JUDGE)
    return backend, base, judge


def build_encoder(config: RunConfig) -> Encoder:
    section = config.encoder
    if section.kind == "bigram":
        return HashedBigramEncoder(dim=section.dim)
    if section.kind == "gaussian":
        return GaussianHashEncoder(dim=section.dim, seed=section.seed)
    if section.kind == "http":
        if not section.endpoint:
            raise ConfigError("encoder.kind=http requires encoder.endpoint")
        return HTTPEncoder(section.endpoint, model=section.model, dim=section.dim,
                           api_key=_secret(section.api_key_env))
    raise ConfigError(f"unknown encoder.kind {section.kind!r}")


def build_trainer(config: RunConfig) -> TrainerClient:
    section = config.trainer
    if section.kind == "mock":
        return MockTrainer()
    if section.kind == "http":
        if not section.endpoint:
            raise ConfigError("trainer.kind=http requires trainer.endpoint")
        return HTTPTrainer(section.endpoint, api_key=_secret(section.api_key_env),
                           poll_interval=section.poll_interval,
                           poll_timeout=section.poll_timeout,
                           inline_dataset=section.inline_dataset)
    raise ConfigError(f"unknown trainer.kind {section.kind!r}")
