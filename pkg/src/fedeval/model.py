"""Differentiable model zoo: multinomial linear classifier and a one-hidden-
layer ReLU MLP, with manual backpropagation, softmax cross-entropy loss and
seeded mini-batch SGD.

Parameters live in a single flat float64 vector; layer views are unpacked on
demand. Gradients use the mean reduction over the batch, so the learning
rate is scale-free in batch size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .data import LabeledDataset
from .errors import NumericError
from .seeding import make_rng

LINEAR = "linear"
MLP = "mlp"


@dataclass(frozen=True)
class ModelSpec:
    """Architecture plus deterministic initialization parameters."""

    kind: str
    n_features: int
    num_classes: int
    hidden_units: int | None = None
    init_seed: int = 0
    init_scale: float = 0.01

    def __post_init__(self):
        if self.kind not in (LINEAR, MLP):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.n_features <= 0 or self.num_classes <= 0:
            raise ValueError("n_features and num_classes must be positive")
        if self.kind == MLP:
            if self.hidden_units is None or self.hidden_units <= 0:
                raise ValueError("mlp requires positive hidden_units")
        elif self.hidden_units is not None:
            raise ValueError("hidden_units only applies to kind='mlp'")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")

    def layer_shapes(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        d, c = self.n_features, self.num_classes
        if self.kind == LINEAR:
            return (("w", (d, c)), ("b", (c,)))
        h = self.hidden_units
        return (("w1", (d, h)), ("b1", (h,)), ("w2", (h, c)), ("b2", (c,)))

    @property
    def param_count(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layer_shapes())

    @property
    def embed_dim(self) -> int:
        """Dimension of the penultimate representation used by prototype heads."""
        return self.n_features if self.kind == LINEAR else int(self.hidden_units)


@dataclass(frozen=True)
class ModelParams:
    """Flat parameter vector with its layer shape descriptor."""

    values: np.ndarray
    shape_descriptor: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        expected = sum(int(np.prod(shape)) for _, shape in self.shape_descriptor)
        if values.ndim != 1 or values.size != expected:
            raise ValueError(
                f"parameter vector length {values.size} does not match descriptor total {expected}"
            )
        if not np.all(np.isfinite(values)):
            raise NumericError("parameter vector contains non-finite values")

    def replace_values(self, values: np.ndarray) -> "ModelParams":
        return ModelParams(values, self.shape_descriptor)


@dataclass(frozen=True)
class SgdConfig:
    """Client-side local training hyperparameters."""

    learning_rate: float = 0.05
    batch_size: int = 32
    local_epochs: int = 1
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


def _unpack(values: np.ndarray, spec: ModelSpec) -> dict[str, np.ndarray]:
    views = {}
    offset = 0
    for name, shape in spec.layer_shapes():
        size = int(np.prod(shape))
        views[name] = values[offset : offset + size].reshape(shape)
        offset += size
    return views


def init_params(spec: ModelSpec) -> ModelParams:
    """Uniform(-init_scale, +init_scale) weights, zero biases, seeded."""
    rng = make_rng(spec.init_seed, 0x1417)
    values = np.zeros(spec.param_count, dtype=np.float64)
    views = _unpack(values, spec)
    for name, shape in spec.layer_shapes():
        if name.startswith("w"):
            views[name][...] = rng.uniform(-spec.init_scale, spec.init_scale, size=shape)
    return ModelParams(values, spec.layer_shapes())


def _softmax_ce(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Stable mean cross-entropy and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    log_norm = np.log(exp.sum(axis=1, keepdims=True))
    loss = float(-np.mean(shifted[np.arange(n), labels] - log_norm[:, 0]))
    dlogits = exp / exp.sum(axis=1, keepdims=True)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def predict_logits(values: np.ndarray, spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    p = _unpack(values, spec)
    if spec.kind == LINEAR:
        return features @ p["w"] + p["b"]
    hidden = np.maximum(features @ p["w1"] + p["b1"], 0.0)
    return hidden @ p["w2"] + p["b2"]


def hidden_embedding(values: np.ndarray, spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    """Penultimate representation: raw features for linear, ReLU hidden for MLP."""
    if spec.kind == LINEAR:
        return features
    p = _unpack(values, spec)
    return np.maximum(features @ p["w1"] + p["b1"], 0.0)


def loss_and_grad(
    params: ModelParams | np.ndarray,
    spec: ModelSpec,
    batch: LabeledDataset,
    weight_decay: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient over the flat vector.

    When weight_decay > 0 adds wd/2 * ||theta||^2 over the full vector.
    """
    values = params.values if isinstance(params, ModelParams) else np.asarray(params)
    if batch.n_samples == 0:
        raise ValueError("batch must be nonempty")
    if not np.all(np.isfinite(values)):
        raise NumericError("non-finite parameters")

    x, y = batch.features, batch.labels
    grad = np.zeros_like(values)
    g = _unpack(grad, spec)
    p = _unpack(values, spec)

    # overflow here means divergence; it surfaces as the NumericError below
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.kind == LINEAR:
            logits = x @ p["w"] + p["b"]
            loss, dlogits = _softmax_ce(logits, y)
            g["w"][...] = x.T @ dlogits
            g["b"][...] = dlogits.sum(axis=0)
        else:
            z1 = x @ p["w1"] + p["b1"]
            a1 = np.maximum(z1, 0.0)
            logits = a1 @ p["w2"] + p["b2"]
            loss, dlogits = _softmax_ce(logits, y)
            g["w2"][...] = a1.T @ dlogits
            g["b2"][...] = dlogits.sum(axis=0)
            da1 = dlogits @ p["w2"].T
            dz1 = da1 * (z1 > 0.0)
            g["w1"][...] = x.T @ dz1
            g["b1"][...] = dz1.sum(axis=0)

    if weight_decay > 0.0:
        loss += 0.5 * weight_decay * float(values @ values)
        grad += weight_decay * values
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")
    return float(loss), grad


def minibatch_schedule(
    n_samples: int, batch_size: int, epochs: int, seed: int
) -> Iterator[np.ndarray]:
    """Seeded per-epoch reshuffled mini-batch index stream, shared by every
    local-update variant so their trajectories coincide step for step."""
    rng = make_rng(seed, 0xB_A7C4)
    for _ in range(epochs):
        order = rng.permutation(n_samples)
        for start in range(0, n_samples, batch_size):
            yield order[start : start + batch_size]


def sgd_train(
    params: ModelParams,
    spec: ModelSpec,
    train: LabeledDataset,
    cfg: SgdConfig,
    seed: int,
) -> tuple[ModelParams, float]:
    """Mini-batch SGD for cfg.local_epochs epochs.

    Returns the new parameters and the deterministic cost in per-example
    gradient evaluations (epochs * n_samples).
    """
    if train.n_samples == 0:
        raise ValueError("training shard must be nonempty")
    values = params.values.copy()
    cost = 0.0
    for batch_idx in minibatch_schedule(train.n_samples, cfg.batch_size, cfg.local_epochs, seed):
        batch = train.subset(batch_idx)
        _, grad = loss_and_grad(values, spec, batch, cfg.weight_decay)
        values = values - cfg.learning_rate * grad
        cost += float(batch_idx.size)
        if not np.all(np.isfinite(values)):
            raise NumericError("training diverged to non-finite parameters")
    return params.replace_values(values), cost


def evaluate(params: ModelParams | np.ndarray, spec: ModelSpec, test: LabeledDataset) -> float:
    """Fraction of argmax-correct predictions; ties break to the lowest class id."""
    if test.n_samples == 0:
        raise ValueError("test set must be nonempty")
    values = params.values if isinstance(params, ModelParams) else np.asarray(params)
    logits = predict_logits(values, spec, test.features)
    predictions = logits.argmax(axis=1)
    return float(np.mean(predictions == test.labels))
