"""Fixtures compartilhadas: datasets sintéticos pequenos e modelos mínimos."""

import numpy as np
import pytest

from fqlab.models.compact_resnet import init_model
from fqlab.schemas.dataset import GenerationConfig
from fqlab.services.synthgen_service import build_spec, generate_dataset
from fqlab.utils.dataset_io import LabeledDataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_generation():
    return GenerationConfig(n_train=6, n_val=3, n_test=3, seed=11)


@pytest.fixture(scope="session")
def syn_b1_small(small_generation):
    """Splits em memória de um Syn_B1 reduzido."""
    return generate_dataset(build_spec("B1"), small_generation)


@pytest.fixture(scope="session")
def syn_layout(tmp_path_factory):
    """Syn_B1 reduzido gravado em disco (DatasetLayout)."""
    root = tmp_path_factory.mktemp("syn_b1")
    generate_dataset(build_spec("B1"), GenerationConfig(n_train=4, n_val=2, n_test=2, seed=5), out_dir=root, overwrite=True)
    return root


@pytest.fixture
def tiny_model():
    return init_model(n_classes=4, seed=0, widths=(4, 4, 4))


def make_dataset(images, labels, class_names=None, split="test") -> LabeledDataset:
    labels = np.asarray(labels, dtype=np.int64)
    names = class_names or [f"C{i}" for i in range(int(labels.max()) + 1)]
    return LabeledDataset(
        images=np.asarray(images, dtype=np.float32),
        labels=labels,
        ids=[f"s{i:04d}" for i in range(labels.size)],
        class_names=names,
        split=split,
    )
