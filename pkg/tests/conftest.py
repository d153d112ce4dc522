import numpy as np
import pytest

from fedeval.data import LabeledDataset, PartitionSpec, generate_synthetic, partition, split_train_test
from fedeval.model import ModelSpec, SgdConfig


@pytest.fixture(scope="session")
def blob_dataset() -> LabeledDataset:
    return generate_synthetic(10, 12, 40, class_separation=3.0, seed=7)


@pytest.fixture(scope="session")
def blob_split(blob_dataset):
    return split_train_test(blob_dataset, 0.25, seed=5)


@pytest.fixture(scope="session")
def blob_shards(blob_split):
    train, test = blob_split
    return partition(train, test, PartitionSpec(num_clients=10, classes_per_client=5, seed=11))


@pytest.fixture(scope="session")
def linear_spec() -> ModelSpec:
    return ModelSpec("linear", n_features=12, num_classes=10, init_seed=3, init_scale=0.05)


@pytest.fixture(scope="session")
def mlp_spec() -> ModelSpec:
    return ModelSpec("mlp", n_features=12, num_classes=10, hidden_units=8, init_seed=3,
                     init_scale=0.05)


@pytest.fixture
def sgd_cfg() -> SgdConfig:
    return SgdConfig(learning_rate=0.1, batch_size=32, local_epochs=1)


def tiny_dataset(features, labels, num_classes) -> LabeledDataset:
    return LabeledDataset(np.asarray(features, dtype=float), np.asarray(labels), num_classes)
