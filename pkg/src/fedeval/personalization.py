"""Personalization adapters layered on top of any base strategy.

Two kinds are provided: first-order inner-loop adaptation (maml) and a
prototype head over the model's penultimate representation (proto), plus
the deterministic stratified support/query split both of them rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import NumericError, UndefinedMetricError
from .seeding import make_rng
from .model import (
    ModelParams,
    ModelSpec,
    SgdConfig,
    hidden_embedding,
    loss_and_grad,
)
from .algorithms import GradFn, _local_loop

NONE = "none"
MAML = "maml"
PROTO = "proto"

# Clients whose baseline accuracy falls below this are excluded from MPI.
MPI_BASE_FLOOR = 0.01


@dataclass(frozen=True)
class PersonalizerConfig:
    """Personalizer selection plus kind-specific hyperparameters."""

    kind: str = NONE
    inner_lr: float | None = None
    inner_steps: int | None = None
    support_fraction: float = 0.5
    embed_dim: int | None = None
    seed: int = 0
    train_integrated: bool = True  # maml only: meta-train vs adapt-at-eval

    def __post_init__(self):
        if self.kind not in (NONE, MAML, PROTO):
            raise ValueError(f"unknown personalizer kind {self.kind!r}")
        if self.kind == MAML:
            if self.inner_lr is None or self.inner_lr <= 0:
                raise ValueError("maml requires inner_lr > 0")
            if self.inner_steps is None or self.inner_steps < 0:
                raise ValueError("maml requires inner_steps >= 0")
        else:
            if self.inner_lr is not None or self.inner_steps is not None:
                raise ValueError("inner_lr/inner_steps only apply to kind='maml'")
        if self.kind == NONE and self.embed_dim is not None:
            raise ValueError("embed_dim only applies to kind='proto'")
        if self.kind == PROTO and self.embed_dim is not None and self.embed_dim <= 0:
            raise ValueError("embed_dim must be positive")
        if not 0.0 < self.support_fraction < 1.0:
            raise ValueError("support_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SupportQuerySplit:
    support: LabeledDataset
    query: LabeledDataset


def support_query_split(
    train: LabeledDataset,
    class_list: tuple[int, ...],
    support_fraction: float,
    seed: int,
) -> SupportQuerySplit:
    """Disjoint stratified split of a client's train set.

    The support side always receives at least one example of every class in
    the client's class list; the query side keeps at least one example
    overall.
    """
    if not 0.0 < support_fraction < 1.0:
        raise ValueError("support_fraction must lie in (0, 1)")
    support_idx: list[int] = []
    query_idx: list[int] = []
    for cls in class_list:
        idx = np.flatnonzero(train.labels == cls)
        if idx.size == 0:
            raise ValueError(f"client train set has no example of class {cls}")
        rng = make_rng(seed, 0x59, cls)
        idx = idx[rng.permutation(idx.size)]
        n_support = max(1, int(round(support_fraction * idx.size)))
        if idx.size >= 2:
            n_support = min(n_support, idx.size - 1)
        support_idx.extend(idx[:n_support].tolist())
        query_idx.extend(idx[n_support:].tolist())
    if not query_idx:
        raise ValueError("query side of the split is empty; client shard too small")
    return SupportQuerySplit(
        support=train.subset(np.array(sorted(support_idx), dtype=np.int64)),
        query=train.subset(np.array(sorted(query_idx), dtype=np.int64)),
    )


def maml_adapt(
    params: ModelParams,
    spec: ModelSpec,
    support: LabeledDataset,
    inner_lr: float,
    steps: int,
    seed: int = 0,
) -> ModelParams:
    """`steps` full-batch gradient steps on the support loss.

    Full-batch adaptation is deterministic; the seed argument is accepted for
    interface stability but has no effect.
    """
    del seed
    if support.n_samples == 0:
        raise ValueError("support set must be nonempty")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    values = params.values
    for _ in range(steps):
        _, grad = loss_and_grad(values, spec, support)
        values = values - inner_lr * grad
        if not np.all(np.isfinite(values)):
            raise NumericError("adaptation diverged to non-finite parameters")
    return params.replace_values(values)


def meta_grad_fn(spec: ModelSpec, support: LabeledDataset, inner_lr: float, weight_decay: float) -> GradFn:
    """First-order meta-gradient: the query-batch gradient evaluated at the
    point reached by one full-batch inner step on the support loss."""

    def grad(values: np.ndarray, query_batch: LabeledDataset) -> tuple[np.ndarray, float]:
        _, g_support = loss_and_grad(values, spec, support, weight_decay)
        adapted = values - inner_lr * g_support
        _, g_query = loss_and_grad(adapted, spec, query_batch, weight_decay)
        return g_query, float(support.n_samples + query_batch.n_samples)

    return grad


def maml_client_update(
    global_params: ModelParams,
    spec: ModelSpec,
    split: SupportQuerySplit,
    cfg: SgdConfig,
    inner_lr: float,
    seed: int,
) -> tuple[ModelParams, float]:
    """Meta-update over the query set: each outer step takes the base SGD
    step evaluated at the inner-adapted point. Cost counts both the support
    and query gradient evaluations."""
    grad_fn = meta_grad_fn(spec, split.support, inner_lr, cfg.weight_decay)
    values, _, cost = _local_loop(
        global_params.values, split.query, cfg, seed, grad_fn, correction=None
    )
    return global_params.replace_values(values), cost


@dataclass(frozen=True)
class PrototypeClassifier:
    """Nearest-prototype head restricted to a client's class list."""

    class_ids: tuple[int, ...]  # ascending
    prototypes: np.ndarray  # (len(class_ids), embed_dim)
    model_values: np.ndarray
    spec: ModelSpec

    def predict(self, features: np.ndarray) -> np.ndarray:
        emb = hidden_embedding(self.model_values, self.spec, features)
        diff = emb[:, None, :] - self.prototypes[None, :, :]
        dist2 = (diff**2).sum(axis=-1)
        # argmin picks the first minimum, i.e. the lowest class id
        nearest = dist2.argmin(axis=1)
        return np.asarray(self.class_ids, dtype=np.int64)[nearest]

    def accuracy(self, test: LabeledDataset) -> float:
        if test.n_samples == 0:
            raise ValueError("test set must be nonempty")
        return float(np.mean(self.predict(test.features) == test.labels))


def proto_adapt(
    params: ModelParams, spec: ModelSpec, support: LabeledDataset
) -> PrototypeClassifier:
    """Build per-class mean-embedding prototypes from the support set."""
    class_ids = tuple(int(c) for c in np.unique(support.labels))
    if not class_ids:
        raise ValueError("support set must be nonempty")
    emb = hidden_embedding(params.values, spec, support.features)
    prototypes = np.stack(
        [emb[support.labels == cls].mean(axis=0) for cls in class_ids]
    )
    return PrototypeClassifier(
        class_ids=class_ids,
        prototypes=prototypes,
        model_values=params.values,
        spec=spec,
    )


def compute_mpi(pfl_accuracies: list[float], base_accuracies: list[float]) -> float:
    """Median percentage improvement of personalized over base accuracy.

    Clients whose base accuracy falls below MPI_BASE_FLOOR are excluded;
    an even count takes the mean of the two middle values.
    """
    if len(pfl_accuracies) != len(base_accuracies):
        raise ValueError("accuracy lists must have equal length")
    if not pfl_accuracies:
        raise ValueError("accuracy lists must be nonempty")
    pfl = np.asarray(pfl_accuracies, dtype=np.float64)
    base = np.asarray(base_accuracies, dtype=np.float64)
    for name, arr in (("pfl", pfl), ("base", base)):
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"{name} accuracies must lie in [0, 1]")
    keep = base >= MPI_BASE_FLOOR
    if not keep.any():
        raise UndefinedMetricError("every client excluded: base accuracies below floor")
    percents = 100.0 * (pfl[keep] - base[keep]) / base[keep]
    return float(np.median(percents))
