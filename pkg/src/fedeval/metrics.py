"""The five evaluation component indices computed from experiment logs.

Per-log indices (accuracy, convergence, time-to-accuracy) read a single
ExperimentLog. Comparative indices (computational efficiency, fairness,
personalization) are min-max rescalings across the full evaluated algorithm
set and are only meaningful when computed over that whole set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fedsim import ExperimentLog

COST_UNITS = "cost_units"
WALL_CLOCK = "wall_clock"

# Comparative index value when the evaluated set provides no discrimination.
NEUTRAL_INDEX = 0.5


@dataclass(frozen=True)
class MetricConfig:
    """Targets and budgets shared by the component indices."""

    target_accuracy: float = 0.80
    round_budget: int = 1000
    accuracy_window: int = 10
    tta_clock: str = COST_UNITS

    def __post_init__(self):
        if not 0.0 < self.target_accuracy < 1.0:
            raise ValueError("target_accuracy must lie in (0, 1)")
        if self.round_budget < 1:
            raise ValueError("round_budget must be >= 1")
        if self.accuracy_window < 1:
            raise ValueError("accuracy_window must be >= 1")
        if self.tta_clock not in (COST_UNITS, WALL_CLOCK):
            raise ValueError(f"unknown tta_clock {self.tta_clock!r}")


@dataclass(frozen=True)
class ComponentIndices:
    """The per-algorithm component indices, each in [0, 1]."""

    accuracy: float
    convergence: float
    comp_efficiency: float
    fairness: float
    personalization: float | None = None

    def __post_init__(self):
        for name in ("accuracy", "convergence", "comp_efficiency", "fairness"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} index {value} outside [0, 1]")
        if self.personalization is not None and not 0.0 <= self.personalization <= 1.0:
            raise ValueError(f"personalization index {self.personalization} outside [0, 1]")

    def as_dict(self) -> dict[str, float | None]:
        return {
            "accuracy": self.accuracy,
            "convergence": self.convergence,
            "comp_efficiency": self.comp_efficiency,
            "fairness": self.fairness,
            "personalization": self.personalization,
        }


def accuracy_index(log: ExperimentLog, cfg: MetricConfig) -> float:
    """Mean of the per-round mean client accuracy over the final window."""
    if not log.records:
        raise ValueError("log has no round records")
    window = log.records[-cfg.accuracy_window :]
    return float(np.mean([r.mean_client_accuracy for r in window]))


def first_crossing_round(log: ExperimentLog, cfg: MetricConfig) -> int:
    """First recorded round whose mean accuracy meets the target, else the
    round budget."""
    for record in log.records:
        if record.mean_client_accuracy >= cfg.target_accuracy:
            return record.round
    return cfg.round_budget


def convergence_index(log: ExperimentLog, cfg: MetricConfig) -> float:
    if not log.records:
        raise ValueError("log has no round records")
    return round_to_convergence_index(first_crossing_round(log, cfg), cfg.round_budget)


def round_to_convergence_index(first_round: float, round_budget: int) -> float:
    """1 - r*/R_max, clipped into [0, 1]."""
    return max(0.0, min(1.0, 1.0 - first_round / round_budget))


def tta(log: ExperimentLog, cfg: MetricConfig) -> float:
    """Cumulative clock value at the first target crossing (capped at the
    full budget when the target is never reached)."""
    if not log.records:
        raise ValueError("log has no round records")
    clock = (
        (lambda r: r.cost_units) if cfg.tta_clock == COST_UNITS else (lambda r: r.wall_clock_seconds)
    )
    total = 0.0
    for record in log.records:
        total += clock(record)
        if record.mean_client_accuracy >= cfg.target_accuracy:
            return total
    return total


def _minmax(values: dict[str, float], higher_is_better: bool) -> dict[str, float]:
    if not values:
        raise ValueError("need at least one algorithm")
    lo, hi = min(values.values()), max(values.values())
    if hi == lo:
        return {name: NEUTRAL_INDEX for name in values}
    span = hi - lo
    if higher_is_better:
        return {name: (v - lo) / span for name, v in values.items()}
    return {name: (hi - v) / span for name, v in values.items()}


def comp_efficiency_indices(ttas: dict[str, float]) -> dict[str, float]:
    """Comparative index: the fastest-to-accuracy algorithm maps to 1.0, the
    slowest to 0.0."""
    return _minmax(ttas, higher_is_better=False)


def fairness_entropy(accuracies: list[float] | np.ndarray, normalized: bool = False) -> float:
    """Entropy of a client accuracy list: -sum(a*ln(a)), with 0*ln(0) = 0.

    The default applies the formula to the raw accuracies. normalized=True
    instead uses the distribution a_i/sum(a) (sensitivity-study variant).
    """
    arr = np.asarray(accuracies, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("accuracies must lie in [0, 1]")
    if normalized:
        total = arr.sum()
        if total <= 0:
            return 0.0
        arr = arr / total
    positive = arr[arr > 0.0]
    if positive.size == 0:
        return 0.0
    return float(-(positive * np.log(positive)).sum())


def fairness_indices(entropies: dict[str, float]) -> dict[str, float]:
    """Comparative index: lowest entropy maps to 1.0, highest to 0.0."""
    return _minmax(entropies, higher_is_better=False)


def personalization_indices(mpis: dict[str, float]) -> dict[str, float]:
    """Comparative index over the personalized algorithms: highest median
    percentage improvement maps to 1.0."""
    return _minmax(mpis, higher_is_better=True)
