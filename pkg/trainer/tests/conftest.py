"""Shared fixtures: a small model config and an in-process service app."""

import pytest

from trainer_ref.model import ModelConfig


@pytest.fixture(scope="session")
def small_config() -> ModelConfig:
    return ModelConfig(dim=32, n_layers=1, n_heads=2, ffn_dim=64, max_seq=128)


@pytest.fixture()
def app(tmp_path, small_config):
    from trainer_ref.service import create_app

    return create_app(tmp_path / "registry", small_config, base_seed=0)


@pytest.fixture()
def client(app):
    from fastapi.testclient import TestClient

    return TestClient(app)


def color_rows(n: int = 64):
    """Memorizable toy dataset: the answer is a function of the input."""
    palette = ["red", "green", "blue", "gold"]
    return [(f"Q: what color is item {i:02d}?", palette[i % 4]) for i in range(n)]
