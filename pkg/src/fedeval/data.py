"""Datasets, synthetic data generation, CIFAR-10 binary ingestion, and the
class-cyclic non-IID partitioner.

All operations are pure functions of their inputs and seeds; returned
datasets hold read-only arrays and are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .seeding import make_rng

CIFAR10_RECORD_BYTES = 3073  # 1 label byte + 32*32*3 pixel bytes
CIFAR10_PIXELS = 3072
CIFAR10_CLASSES = 10


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus integer class labels in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = _frozen(np.asarray(self.features, dtype=np.float64))
        labels = _frozen(np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if labels.ndim != 1:
            raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
        if features.shape[0] != labels.shape[0]:
            raise ValueError(
                f"row count mismatch: {features.shape[0]} features vs {labels.shape[0]} labels"
            )
        if self.num_classes <= 0:
            raise ValueError("num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class ClientShard:
    """One client's local train/test data together with its class list."""

    client_id: int
    class_list: tuple[int, ...]
    train: LabeledDataset
    test: LabeledDataset

    def __post_init__(self):
        if self.client_id < 0:
            raise ValueError("client_id must be >= 0")
        object.__setattr__(self, "class_list", tuple(int(c) for c in self.class_list))
        allowed = set(self.class_list)
        for name, ds in (("train", self.train), ("test", self.test)):
            present = set(np.unique(ds.labels).tolist())
            if not present <= allowed:
                raise ValueError(
                    f"{name} labels {sorted(present - allowed)} outside class list {self.class_list}"
                )


@dataclass(frozen=True)
class PartitionSpec:
    """Parameters of the cyclic label-skew partition."""

    num_clients: int
    classes_per_client: int
    seed: int = 0

    def __post_init__(self):
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if self.classes_per_client < 1:
            raise ValueError("classes_per_client must be >= 1")


def generate_synthetic(
    num_classes: int,
    n_features: int,
    samples_per_class: int,
    class_separation: float,
    seed: int,
) -> LabeledDataset:
    """Gaussian blobs: one unit-covariance cluster per class.

    Class means are drawn deterministically from the seed and rescaled so the
    minimum pairwise distance between means equals ``class_separation``.
    Samples are emitted class-major (all of class 0, then class 1, ...).
    """
    if num_classes <= 0 or n_features <= 0 or samples_per_class <= 0:
        raise ValueError("num_classes, n_features and samples_per_class must be positive")
    if class_separation <= 0:
        raise ValueError("class_separation must be positive")

    rng = make_rng(seed, 0x5D_A7A)
    means = rng.normal(size=(num_classes, n_features))
    if num_classes > 1:
        diff = means[:, None, :] - means[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        min_dist = dist[~np.eye(num_classes, dtype=bool)].min()
        means *= class_separation / min_dist

    n = num_classes * samples_per_class
    noise = rng.normal(size=(n, n_features))
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), samples_per_class)
    features = means[labels] + noise
    return LabeledDataset(features, labels, num_classes)


def parse_cifar10_binary(raw: bytes) -> LabeledDataset:
    """Decode CIFAR-10 binary records (1 label byte + 3072 pixel bytes each).

    Pixel bytes are channel-major (R, G, B), row-major within each channel,
    and are mapped to [0, 1] by dividing by 255.
    """
    if len(raw) % CIFAR10_RECORD_BYTES != 0:
        raise DataFormatError(
            f"input length {len(raw)} is not a multiple of {CIFAR10_RECORD_BYTES}"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR10_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() >= CIFAR10_CLASSES:
        bad = int(labels.max())
        raise DataFormatError(f"label byte {bad} out of range [0, {CIFAR10_CLASSES})")
    features = records[:, 1:].astype(np.float64) / 255.0
    return LabeledDataset(features, labels, CIFAR10_CLASSES)


def split_train_test(
    dataset: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic stratified train/test split.

    Each class keeps at least one sample on both sides whenever it has two
    or more samples.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for cls in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size == 0:
            continue
        perm = make_rng(seed, 0x5971, cls).permutation(idx.size)
        idx = idx[perm]
        n_test = int(round(test_fraction * idx.size))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        else:
            n_test = 0
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    train = dataset.subset(np.sort(np.concatenate(train_idx)))
    test = dataset.subset(np.sort(np.concatenate(test_idx)))
    return train, test


def class_list_for(client_id: int, num_classes: int, classes_per_client: int) -> tuple[int, ...]:
    """Cyclic class assignment: client i holds classes (i+n) mod C, n=0..k-1."""
    return tuple((client_id + n) % num_classes for n in range(classes_per_client))


def _deal_class(
    indices: np.ndarray, holders: list[int], rng: np.random.Generator
) -> dict[int, list[int]]:
    """Deal one class's sample indices round-robin among holder clients."""
    order = indices[rng.permutation(indices.size)]
    dealt: dict[int, list[int]] = {h: [] for h in holders}
    for pos, sample in enumerate(order.tolist()):
        dealt[holders[pos % len(holders)]].append(sample)
    return dealt


def partition(
    train: LabeledDataset, test: LabeledDataset, spec: PartitionSpec
) -> list[ClientShard]:
    """Split train and test identically across clients via the cyclic rule.

    Within each class, samples are dealt round-robin (seeded shuffled order)
    among all clients whose class list contains that class, so the shards
    form an exact partition of the inputs.
    """
    num_classes = train.num_classes
    if test.num_classes != num_classes:
        raise ValueError("train and test must agree on num_classes")
    if spec.classes_per_client > num_classes:
        raise ValueError(
            f"classes_per_client {spec.classes_per_client} exceeds num_classes {num_classes}"
        )

    class_lists = [
        class_list_for(i, num_classes, spec.classes_per_client)
        for i in range(spec.num_clients)
    ]
    holders: dict[int, list[int]] = {c: [] for c in range(num_classes)}
    for i, classes in enumerate(class_lists):
        for c in classes:
            holders[c].append(i)

    assignments = {"train": train, "test": test}
    per_client: dict[str, list[list[int]]] = {
        name: [[] for _ in range(spec.num_clients)] for name in assignments
    }
    for stream, (name, ds) in enumerate(assignments.items()):
        for c in range(num_classes):
            if not holders[c]:
                continue
            idx = np.flatnonzero(ds.labels == c)
            if idx.size == 0:
                continue
            dealt = _deal_class(idx, holders[c], make_rng(spec.seed, stream, c))
            for client, samples in dealt.items():
                per_client[name][client].extend(samples)

    shards = []
    for i in range(spec.num_clients):
        shards.append(
            ClientShard(
                client_id=i,
                class_list=class_lists[i],
                train=train.subset(np.array(sorted(per_client["train"][i]), dtype=np.int64)),
                test=test.subset(np.array(sorted(per_client["test"][i]), dtype=np.int64)),
            )
        )
    return shards
