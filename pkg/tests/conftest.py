"""Shared fixtures: a small synthetic corpus on disk and a model trained on it.

Session-scoped fixtures hold only immutable artifacts (files, loaded rows);
anything tests mutate is rebuilt per test.
"""

from __future__ import annotations

import os

import pytest

from coactionrec.datamodel import (FeatureStore, build_sequences,
                                   load_interactions, load_item_features)
from coactionrec.service import ops
from coactionrec.service.schemas import TrainRequest
from coactionrec.synth import SynthConfig, generate_synthetic

SMOKE_CONFIG_TEXT = """\
dim=16
behavior_dim=4
layers=2
interests=2
lambda=0.2
negatives=20
lr=0.001
epochs=3
batch=16
seed=11
neighbor_cap=5
t_max=50
"""


@pytest.fixture(scope="session")
def smoke_dir(tmp_path_factory) -> str:
    """Directory holding a 30-user / 60-item synthetic corpus."""
    out = tmp_path_factory.mktemp("corpus")
    cfg = SynthConfig(users=30, items=60, categories=6, sellers=8,
                      min_len=6, max_len=12)
    generate_synthetic(cfg, seed=11, out_dir=str(out))
    return str(out)


@pytest.fixture(scope="session")
def smoke_config_path(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("cfg") / "train.cfg"
    path.write_text(SMOKE_CONFIG_TEXT, encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def smoke_rows(smoke_dir):
    return load_item_features(os.path.join(smoke_dir, "item_features.tsv"))


@pytest.fixture(scope="session")
def smoke_records(smoke_dir):
    return load_interactions(os.path.join(smoke_dir, "interactions.tsv"))


@pytest.fixture
def smoke_store(smoke_rows) -> FeatureStore:
    # fresh per test: loading a model overwrites the store's vocabularies
    return FeatureStore(list(smoke_rows))


@pytest.fixture
def smoke_sequences(smoke_records):
    return build_sequences(list(smoke_records), t_max=50)


@pytest.fixture(scope="session")
def model_dir(smoke_dir, smoke_config_path, tmp_path_factory) -> str:
    """A model trained for 3 epochs on the smoke corpus, saved to disk."""
    out = tmp_path_factory.mktemp("model")
    ops.run_train(TrainRequest(data_dir=smoke_dir, out_dir=str(out),
                               config_path=smoke_config_path))
    return str(out)
