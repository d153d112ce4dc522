"""Pluggable FL strategies: FedAvg, FedDyn, and SCAFFOLD.

Each strategy contributes a client update and a server aggregation rule over
flat parameter vectors. All client updates share one seeded mini-batch loop
(see model.minibatch_schedule), so strategies whose correction terms vanish
follow bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import LabeledDataset
from .errors import NumericError
from .model import ModelSpec, SgdConfig, loss_and_grad, minibatch_schedule

FEDAVG = "fedavg"
FEDDYN = "feddyn"
SCAFFOLD = "scaffold"

# (theta, batch) -> (gradient of the data loss at theta, per-example eval count)
GradFn = Callable[[np.ndarray, LabeledDataset], tuple[np.ndarray, float]]


@dataclass(frozen=True)
class StrategyConfig:
    """Strategy selection plus algorithm-specific hyperparameters."""

    kind: str
    feddyn_alpha: float | None = None
    server_lr: float | None = None

    def __post_init__(self):
        if self.kind not in (FEDAVG, FEDDYN, SCAFFOLD):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == FEDDYN:
            if self.feddyn_alpha is None:
                object.__setattr__(self, "feddyn_alpha", 0.1)
            if self.feddyn_alpha <= 0:
                raise ValueError("feddyn_alpha must be > 0")
        elif self.feddyn_alpha is not None:
            raise ValueError("feddyn_alpha only applies to kind='feddyn'")
        if self.kind == SCAFFOLD:
            if self.server_lr is None:
                object.__setattr__(self, "server_lr", 1.0)
            if self.server_lr <= 0:
                raise ValueError("server_lr must be > 0")
        elif self.server_lr is not None:
            raise ValueError("server_lr only applies to kind='scaffold'")


def plain_grad_fn(spec: ModelSpec, train: LabeledDataset, weight_decay: float) -> GradFn:
    """Gradient of the mean data loss over a mini-batch of the client's shard."""

    def grad(values: np.ndarray, batch: LabeledDataset) -> tuple[np.ndarray, float]:
        _, g = loss_and_grad(values, spec, batch, weight_decay)
        return g, float(batch.n_samples)

    return grad


def _local_loop(
    values: np.ndarray,
    train: LabeledDataset,
    cfg: SgdConfig,
    seed: int,
    grad_fn: GradFn,
    correction: Callable[[np.ndarray], np.ndarray] | None,
) -> tuple[np.ndarray, int, float]:
    """Run the shared local-SGD loop; returns (theta, steps, cost_units)."""
    if train.n_samples == 0:
        raise ValueError("training shard must be nonempty")
    theta = values.copy()
    steps = 0
    cost = 0.0
    for batch_idx in minibatch_schedule(train.n_samples, cfg.batch_size, cfg.local_epochs, seed):
        g, c = grad_fn(theta, train.subset(batch_idx))
        if correction is not None:
            g = g + correction(theta)
        theta = theta - cfg.learning_rate * g
        steps += 1
        cost += c
        if not np.all(np.isfinite(theta)):
            raise NumericError("client update diverged to non-finite parameters")
    return theta, steps, cost


def fedavg_aggregate(updates: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Weighted average of client parameter vectors, weights ~ sample counts."""
    if not updates:
        raise ValueError("updates must be nonempty")
    length = updates[0][0].shape[0]
    total = 0.0
    for values, n in updates:
        if values.shape != (length,):
            raise ValueError("mismatched parameter vector lengths")
        if n < 1:
            raise ValueError("sample counts must be >= 1")
        total += n
    out = np.zeros(length, dtype=np.float64)
    for values, n in updates:
        out += (n / total) * values
    return out


@dataclass(frozen=True)
class ScaffoldClientResult:
    delta_y: np.ndarray
    delta_c: np.ndarray
    new_client_control: np.ndarray
    num_steps: int
    cost_units: float


def scaffold_client_update(
    global_values: np.ndarray,
    client_control: np.ndarray,
    server_control: np.ndarray,
    train: LabeledDataset,
    spec: ModelSpec,
    cfg: SgdConfig,
    seed: int,
    grad_fn: GradFn | None = None,
) -> ScaffoldClientResult:
    """Local steps y <- y - lr*(g(y) - c_i + c), then the cheap control update
    c_i+ = c_i - c + (x - y)/(K*lr)."""
    if cfg.learning_rate <= 0:
        raise ValueError("scaffold requires a positive learning rate")
    if grad_fn is None:
        grad_fn = plain_grad_fn(spec, train, cfg.weight_decay)
    drift = server_control - client_control
    y, steps, cost = _local_loop(
        global_values, train, cfg, seed, grad_fn, correction=lambda _: drift
    )
    new_control = client_control - server_control + (global_values - y) / (steps * cfg.learning_rate)
    return ScaffoldClientResult(
        delta_y=y - global_values,
        delta_c=new_control - client_control,
        new_client_control=new_control,
        num_steps=steps,
        cost_units=cost,
    )


def scaffold_server_update(
    global_values: np.ndarray,
    server_control: np.ndarray,
    deltas: Sequence[tuple[np.ndarray, np.ndarray]],
    n_total: int,
    server_lr: float,
) -> tuple[np.ndarray, np.ndarray]:
    """x+ = x + (lr_g/|S|) * sum(dy); c+ = c + (1/N) * sum(dc)."""
    if not deltas:
        raise ValueError("deltas must be nonempty")
    for dy, dc in deltas:
        if dy.shape != global_values.shape or dc.shape != server_control.shape:
            raise ValueError("mismatched parameter vector lengths")
    sum_dy = np.zeros_like(global_values)
    sum_dc = np.zeros_like(server_control)
    for dy, dc in deltas:
        sum_dy += dy
        sum_dc += dc
    new_global = global_values + (server_lr / len(deltas)) * sum_dy
    new_control = server_control + sum_dc / n_total
    return new_global, new_control


def feddyn_objective_grad(
    values: np.ndarray,
    spec: ModelSpec,
    batch: LabeledDataset,
    grad_state: np.ndarray,
    global_values: np.ndarray,
    alpha: float,
    weight_decay: float = 0.0,
) -> np.ndarray:
    """Gradient of f_i(theta) - <g_i, theta> + (alpha/2)*||theta - w||^2."""
    _, g = loss_and_grad(values, spec, batch, weight_decay)
    return g - grad_state + alpha * (values - global_values)


def feddyn_client_update(
    global_values: np.ndarray,
    grad_state: np.ndarray,
    train: LabeledDataset,
    alpha: float,
    spec: ModelSpec,
    cfg: SgdConfig,
    seed: int,
    grad_fn: GradFn | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Approximately minimize the dynamically regularized local objective,
    then refresh the client gradient state: g_i+ = g_i - alpha*(theta - w)."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if grad_fn is None:
        grad_fn = plain_grad_fn(spec, train, cfg.weight_decay)

    def correction(theta: np.ndarray) -> np.ndarray:
        return -grad_state + alpha * (theta - global_values)

    theta, _, cost = _local_loop(global_values, train, cfg, seed, grad_fn, correction)
    new_grad_state = grad_state - alpha * (theta - global_values)
    return theta, new_grad_state, cost


def feddyn_server_update(
    server_state: np.ndarray,
    client_models: Sequence[np.ndarray],
    previous_global: np.ndarray,
    alpha: float,
    n_total: int,
) -> tuple[np.ndarray, np.ndarray]:
    """h+ = h - alpha*(1/N)*sum(theta_i - w); w+ = mean(theta_i) - h+/alpha."""
    if not client_models:
        raise ValueError("client_models must be nonempty")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    for theta in client_models:
        if theta.shape != previous_global.shape:
            raise ValueError("mismatched parameter vector lengths")
    mean_theta = np.mean(np.stack(client_models), axis=0)
    drift = np.zeros_like(previous_global)
    for theta in client_models:
        drift += theta - previous_global
    new_state = server_state - alpha * drift / n_total
    new_global = mean_theta - new_state / alpha
    return new_global, new_state
