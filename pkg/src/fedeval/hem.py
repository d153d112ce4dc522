"""Use-case importance vectors, holistic score composition, performance
bands, and ranking.

The holistic score is the importance-weighted average of the component
indices: weights are the importance levels normalized to sum to one over the
components that apply to the algorithm (the personalization level only
participates when a personalization index is present).
"""

from __future__ import annotations

from dataclasses import dataclass

from .metrics import ComponentIndices

LOW = 1.0
MODERATE = 2.0
HIGH = 3.0

_NAMED_LEVELS = {"low": LOW, "moderate": MODERATE, "high": HIGH}

CORE_COMPONENTS = ("accuracy", "convergence", "comp_efficiency", "fairness")
PERSONALIZATION = "personalization"

EXCELLENT = "Excellent"
GOOD = "Good"
ACCEPTABLE = "Acceptable"
LOW_BAND = "Low"

DEFAULT_PERSONALIZATION_IMPORTANCE = MODERATE


def importance_level(value: float | int | str) -> float:
    """Resolve a named level (low/moderate/high) or a non-negative number."""
    if isinstance(value, str):
        name = value.strip().lower()
        if name in _NAMED_LEVELS:
            return _NAMED_LEVELS[name]
        try:
            value = float(name)
        except ValueError:
            raise ValueError(f"unknown importance level {value!r}") from None
    level = float(value)
    if level < 0:
        raise ValueError("importance levels must be >= 0")
    return level


@dataclass(frozen=True)
class ImportanceVector:
    """Per-component importance levels for one use case."""

    accuracy: float
    convergence: float
    comp_efficiency: float
    fairness: float
    personalization: float = DEFAULT_PERSONALIZATION_IMPORTANCE
    use_case_name: str = "custom"

    def __post_init__(self):
        levels = [self.accuracy, self.convergence, self.comp_efficiency, self.fairness,
                  self.personalization]
        if any(level < 0 for level in levels):
            raise ValueError("importance levels must be >= 0")
        if all(level == 0 for level in levels):
            raise ValueError("at least one importance level must be positive")

    def level_for(self, component: str) -> float:
        return getattr(self, component)

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "convergence": self.convergence,
            "comp_efficiency": self.comp_efficiency,
            "fairness": self.fairness,
            "personalization": self.personalization,
        }


USE_CASE_PRESETS: dict[str, ImportanceVector] = {
    "iot": ImportanceVector(HIGH, LOW, HIGH, HIGH, use_case_name="iot"),
    "smartphone": ImportanceVector(MODERATE, HIGH, HIGH, MODERATE, use_case_name="smartphone"),
    "institution": ImportanceVector(HIGH, LOW, LOW, HIGH, use_case_name="institution"),
}


def preset(name: str) -> ImportanceVector:
    try:
        return USE_CASE_PRESETS[name.strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown use case {name!r}; expected one of {sorted(USE_CASE_PRESETS)}"
        ) from None


def compose_hem(indices: ComponentIndices, importance: ImportanceVector) -> float:
    """Importance-weighted average of the applicable component indices."""
    pairs: list[tuple[float, float]] = []
    for component in CORE_COMPONENTS:
        level = importance.level_for(component)
        value = getattr(indices, component)
        if level > 0:
            if value is None:
                raise ValueError(f"missing index for weighted component {component!r}")
            pairs.append((value, level))
    if indices.personalization is not None and importance.personalization > 0:
        pairs.append((indices.personalization, importance.personalization))
    total_weight = sum(level for _, level in pairs)
    if total_weight <= 0:
        raise ValueError("all applicable importance levels are zero")
    return sum(value * level for value, level in pairs) / total_weight


def band(hem: float) -> str:
    """Performance band: Excellent above 0.8, Low below 0.5, boundaries at
    0.8/0.7 fall in Good and 0.5 in Acceptable."""
    if not 0.0 <= hem <= 1.0:
        raise ValueError(f"holistic score {hem} outside [0, 1]")
    if hem > 0.8:
        return EXCELLENT
    if hem >= 0.7:
        return GOOD
    if hem >= 0.5:
        return ACCEPTABLE
    return LOW_BAND


def rank(scores: dict[str, float]) -> list[str]:
    """Algorithms sorted by score descending; ties break lexicographically."""
    if not scores:
        raise ValueError("scores must be nonempty")
    return sorted(scores, key=lambda name: (-scores[name], name))
