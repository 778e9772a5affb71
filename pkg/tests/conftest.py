"""Shared fixtures: tiny corpora and a small trained artifact bundle."""

from __future__ import annotations

from pathlib import Path

import pytest

from nextline.corpus import LanguageProfile
from nextline.embedder import TrainConfig
from nextline.pipeline import TrainSettings, train_pipeline
from nextline.service import load_bundle
from nextline.walker import WalkConfig

CHAIN_LINES = [
    "total = load_input(path)",
    "cleaned = scrub(total)",
    "model = fit(cleaned)",
    "score = validate(model)",
    "publish(score)",
]


@pytest.fixture(scope="session")
def profile() -> LanguageProfile:
    return LanguageProfile()


def write_chain_file(path: Path, lines: list[str], repeats: int) -> None:
    block = "\n".join(lines)
    path.write_text("\n\n".join([block] * repeats) + "\n", encoding="utf-8")


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> Path:
    """One file: a 5-line chain block repeated 50 times."""
    root = tmp_path_factory.mktemp("small_corpus")
    write_chain_file(root / "chain.py", CHAIN_LINES, repeats=50)
    return root


@pytest.fixture(scope="session")
def small_settings() -> TrainSettings:
    settings = TrainSettings.with_seed(42)
    settings.train = TrainConfig(epochs=60, seed=43)
    settings.walk = WalkConfig(seed=42)
    return settings


@pytest.fixture(scope="session")
def small_bundle_dir(tmp_path_factory, small_corpus, small_settings) -> Path:
    out = tmp_path_factory.mktemp("small_artifacts")
    train_pipeline(small_corpus, out, small_settings)
    return out


@pytest.fixture(scope="session")
def small_bundle(small_bundle_dir):
    bundle = load_bundle(small_bundle_dir)
    yield bundle
    bundle.close()
