"""Report file schema (versioned JSON), atomic writes, re-scoring, and the
self-audit that recomputes every stored index from the raw measurements.

The same index-computation code path is used when building and when
verifying a report, so a clean verify means exact float equality.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .hem import ImportanceVector, band, compose_hem, rank
from .metrics import (
    ComponentIndices,
    MetricConfig,
    comp_efficiency_indices,
    fairness_entropy,
    fairness_indices,
    personalization_indices,
    round_to_convergence_index,
)
from .personalization import compute_mpi

SCHEMA_VERSION = 1


def importance_to_json(importance: ImportanceVector) -> dict[str, Any]:
    return {"use_case_name": importance.use_case_name, "levels": importance.as_dict()}


def importance_from_json(payload: dict[str, Any]) -> ImportanceVector:
    levels = payload["levels"]
    return ImportanceVector(
        accuracy=levels["accuracy"],
        convergence=levels["convergence"],
        comp_efficiency=levels["comp_efficiency"],
        fairness=levels["fairness"],
        personalization=levels.get("personalization", 2.0),
        use_case_name=payload.get("use_case_name", "custom"),
    )


def metric_config_from_json(payload: dict[str, Any]) -> MetricConfig:
    return MetricConfig(
        target_accuracy=payload["target_accuracy"],
        round_budget=payload["round_budget"],
        accuracy_window=payload.get("accuracy_window", 10),
        tta_clock=payload.get("tta_clock", "cost_units"),
    )


def compute_component_indices(
    mean_rows: dict[str, dict[str, Any]],
    personalized: dict[str, bool],
    metric_cfg: MetricConfig,
) -> dict[str, ComponentIndices]:
    """Component indices for every algorithm with raw mean measurements.

    mean_rows holds, per algorithm, the seed-averaged raw measurements:
    accuracy, first_crossing_round, tta, entropy, and mpi (personalized
    entries only). Comparative indices use min-max over this whole set.
    """
    if not mean_rows:
        raise ValueError("no algorithms to index")
    efficiency = comp_efficiency_indices({n: row["tta"] for n, row in mean_rows.items()})
    fairness = fairness_indices({n: row["entropy"] for n, row in mean_rows.items()})
    mpis = {
        n: row["mpi"]
        for n, row in mean_rows.items()
        if personalized.get(n) and row.get("mpi") is not None
    }
    pers_idx = personalization_indices(mpis) if mpis else {}

    out: dict[str, ComponentIndices] = {}
    for name, row in mean_rows.items():
        out[name] = ComponentIndices(
            accuracy=row["accuracy"],
            convergence=round_to_convergence_index(
                row["first_crossing_round"], metric_cfg.round_budget
            ),
            comp_efficiency=efficiency[name],
            fairness=fairness[name],
            personalization=pers_idx.get(name),
        )
    return out


def score_components(
    components: dict[str, ComponentIndices], importance: ImportanceVector
) -> tuple[dict[str, float], dict[str, str], list[str]]:
    """Holistic scores, bands, and the ranking for a set of component indices."""
    scores = {name: compose_hem(idx, importance) for name, idx in components.items()}
    bands = {name: band(score) for name, score in scores.items()}
    return scores, bands, rank(scores)


def components_from_json(payload: dict[str, Any]) -> ComponentIndices:
    return ComponentIndices(
        accuracy=payload["accuracy"],
        convergence=payload["convergence"],
        comp_efficiency=payload["comp_efficiency"],
        fairness=payload["fairness"],
        personalization=payload.get("personalization"),
    )


def external_indices_report(
    components: dict[str, ComponentIndices],
    importance: ImportanceVector,
    metric_config: MetricConfig,
    note: str = "",
) -> dict[str, Any]:
    """A valid report built from externally supplied component indices.

    Such reports carry no raw measurements (so the self-audit flags them as
    unverifiable) but can be re-scored and ranked like any emitted report.
    """
    scores, bands, ranking = score_components(components, importance)
    algorithms = {}
    for name, indices in components.items():
        algorithms[name] = {
            "personalized": indices.personalization is not None,
            "base_algorithm": None,
            "completed": True,
            "error": None,
            "raw": None,
            "components": indices.as_dict(),
            "hem_score": scores[name],
            "band": bands[name],
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "config_fingerprint": "external",
        "metric_config": {
            "target_accuracy": metric_config.target_accuracy,
            "round_budget": metric_config.round_budget,
            "accuracy_window": metric_config.accuracy_window,
            "tta_clock": metric_config.tta_clock,
        },
        "importance": importance_to_json(importance),
        "seeds": [],
        "num_clients": 0,
        "algorithms": algorithms,
        "ranking": ranking,
        "notes": [note] if note else [],
    }


def write_report_atomic(report: dict[str, Any], path: str | Path) -> None:
    """Serialize then rename into place; a crash never leaves a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(report, indent=2, sort_keys=True) + "\n"
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def load_report(path: str | Path) -> dict[str, Any]:
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"report file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"report is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("report root must be a JSON object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported report schema_version {version!r}; expected {SCHEMA_VERSION}"
        )
    if "algorithms" not in payload or not isinstance(payload["algorithms"], dict):
        raise ConfigError("report is missing its algorithms table")
    return payload


def rescore_report(report: dict[str, Any], importance: ImportanceVector) -> dict[str, Any]:
    """Recompute scores/bands/ranking from stored component indices under a
    new importance vector; raw measurements are untouched."""
    components = {
        name: components_from_json(entry["components"])
        for name, entry in report["algorithms"].items()
        if entry.get("components") is not None
    }
    if not components:
        raise ConfigError("report has no component indices to re-score")
    scores, bands, ranking = score_components(components, importance)
    out = json.loads(json.dumps(report))  # deep copy
    out["importance"] = importance_to_json(importance)
    for name, entry in out["algorithms"].items():
        if name in scores:
            entry["hem_score"] = scores[name]
            entry["band"] = bands[name]
    out["ranking"] = ranking
    return out


def verify_report(report: dict[str, Any]) -> list[str]:
    """Recompute indices and scores from the raw measurements; returns a list
    of discrepancies (empty when the report is self-consistent)."""
    problems: list[str] = []
    algorithms = report["algorithms"]
    metric_cfg = metric_config_from_json(report["metric_config"])
    importance = importance_from_json(report["importance"])

    mean_rows: dict[str, dict[str, Any]] = {}
    personalized: dict[str, bool] = {}
    for name, entry in algorithms.items():
        if not entry.get("completed"):
            if entry.get("components") is not None or entry.get("hem_score") is not None:
                problems.append(f"{name}: incomplete run must not carry indices")
            continue
        raw = entry.get("raw")
        if raw is None:
            problems.append(f"{name}: no raw measurements to verify against")
            continue
        mean_rows[name] = raw["mean"]
        personalized[name] = bool(entry.get("personalized"))

    if not mean_rows:
        return problems

    expected = compute_component_indices(mean_rows, personalized, metric_cfg)
    for name, indices in expected.items():
        stored = algorithms[name].get("components")
        if stored is None:
            problems.append(f"{name}: missing component indices")
            continue
        for key, value in indices.as_dict().items():
            if stored.get(key) != value:
                problems.append(
                    f"{name}: component {key} stored {stored.get(key)!r} != recomputed {value!r}"
                )

    components = {name: expected[name] for name in mean_rows}
    scores, bands, ranking = score_components(components, importance)
    for name in mean_rows:
        entry = algorithms[name]
        if entry.get("hem_score") != scores[name]:
            problems.append(
                f"{name}: hem_score stored {entry.get('hem_score')!r} != recomputed {scores[name]!r}"
            )
        if entry.get("band") != bands[name]:
            problems.append(f"{name}: band stored {entry.get('band')!r} != {bands[name]!r}")
    if report.get("ranking") != ranking:
        problems.append(f"ranking stored {report.get('ranking')!r} != recomputed {ranking!r}")

    # raw mean rows must themselves be reproducible from the per-seed rows,
    # and per-seed entropy/mpi from the stored per-client accuracy lists
    for name, entry in algorithms.items():
        if not entry.get("completed") or entry.get("raw") is None:
            continue
        per_seed = entry["raw"]["per_seed"]
        mean = entry["raw"]["mean"]
        for key in ("accuracy", "first_crossing_round", "tta", "entropy"):
            values = [row[key] for row in per_seed]
            recomputed = sum(values) / len(values)
            if mean.get(key) != recomputed:
                problems.append(f"{name}: raw mean {key} is not the per-seed average")
        mpis = [row["mpi"] for row in per_seed if row.get("mpi") is not None]
        expected_mpi = (sum(mpis) / len(mpis)) if mpis else None
        if mean.get("mpi") != expected_mpi:
            problems.append(f"{name}: raw mean mpi is not the per-seed average")

        for row in per_seed:
            entropy = fairness_entropy(row["final_client_accuracies"])
            if row["entropy"] != entropy:
                problems.append(
                    f"{name} seed {row['seed']}: entropy does not match its accuracy list"
                )
        base_name = entry.get("base_algorithm")
        base_entry = algorithms.get(base_name) if base_name else None
        if entry.get("personalized") and base_entry and base_entry.get("raw"):
            base_rows = {row["seed"]: row for row in base_entry["raw"]["per_seed"]}
            for row in per_seed:
                if row.get("mpi") is None or row["seed"] not in base_rows:
                    continue
                recomputed_mpi = compute_mpi(
                    row["final_client_accuracies"],
                    base_rows[row["seed"]]["final_client_accuracies"],
                )
                if row["mpi"] != recomputed_mpi:
                    problems.append(
                        f"{name} seed {row['seed']}: mpi does not match the accuracy lists"
                    )
    return problems
