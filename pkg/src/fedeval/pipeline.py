"""End-to-end evaluation pipeline: materialize data, run every configured
(algorithm, seed) experiment, compute the component indices, compose the
holistic scores, and emit the report plus per-round CSV logs.
"""

from __future__ import annotations

import csv
import dataclasses
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import data as data_mod
from .config import (
    AlgorithmEntry,
    Cifar10DatasetConfig,
    ExperimentConfig,
    SyntheticDatasetConfig,
)
from .errors import UndefinedMetricError
from .fedsim import ExperimentLog, RunConfig, run_experiment
from .metrics import accuracy_index, fairness_entropy, first_crossing_round, tta
from .personalization import NONE, compute_mpi
from .report import (
    SCHEMA_VERSION,
    compute_component_indices,
    importance_to_json,
    score_components,
    write_report_atomic,
)
from .seeding import derive_seed

_TAG_INIT = 0x171D

Logger = Callable[[str], None]


def _quiet(_: str) -> None:
    pass


def materialize_shards(cfg: ExperimentConfig) -> list[data_mod.ClientShard]:
    """Build the train/test datasets and deal them out to clients."""
    ds = cfg.dataset
    if isinstance(ds, SyntheticDatasetConfig):
        full = data_mod.generate_synthetic(
            ds.num_classes, ds.n_features, ds.samples_per_class, ds.class_separation, ds.seed
        )
        train, test = data_mod.split_train_test(full, ds.test_fraction, ds.seed)
    else:
        assert isinstance(ds, Cifar10DatasetConfig)
        chunks = [data_mod.parse_cifar10_binary(Path(p).read_bytes()) for p in ds.train_files]
        train = data_mod.LabeledDataset(
            np.concatenate([c.features for c in chunks]),
            np.concatenate([c.labels for c in chunks]),
            data_mod.CIFAR10_CLASSES,
        )
        test = data_mod.parse_cifar10_binary(Path(ds.test_file).read_bytes())
    spec = data_mod.PartitionSpec(
        cfg.partition.num_clients, cfg.partition.classes_per_client, cfg.partition.seed
    )
    return data_mod.partition(train, test, spec)


def run_config_for(cfg: ExperimentConfig, entry: AlgorithmEntry, seed: int) -> RunConfig:
    model = dataclasses.replace(
        cfg.model, init_seed=derive_seed(cfg.model.init_seed, _TAG_INIT, seed)
    )
    return RunConfig(
        algorithm_name=entry.name,
        strategy=entry.strategy,
        personalizer=entry.personalizer,
        model=model,
        training=cfg.training,
        rounds=cfg.metrics.round_budget,
        seed=seed,
        participation=cfg.federation.participation,
        eval_every=cfg.federation.eval_every,
        early_stop_accuracy=cfg.federation.early_stop_accuracy,
    )


def _write_round_csv(path: Path, log: ExperimentLog) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["round", "client_id", "accuracy", "cost_units", "wall_clock"])
        for record in log.records:
            for client_id, accuracy in enumerate(record.client_accuracies):
                writer.writerow(
                    [record.round, client_id, repr(accuracy),
                     repr(record.cost_units), repr(record.wall_clock_seconds)]
                )


def _seed_row(log: ExperimentLog, cfg: ExperimentConfig, seed: int) -> dict[str, Any]:
    final = list(log.records[-1].client_accuracies)
    return {
        "seed": seed,
        "accuracy": accuracy_index(log, cfg.metrics),
        "first_crossing_round": first_crossing_round(log, cfg.metrics),
        "tta": tta(log, cfg.metrics),
        "entropy": fairness_entropy(final),
        "final_client_accuracies": final,
        "mpi": None,
        "total_cost_units": sum(r.cost_units for r in log.records),
        "wall_clock_seconds": sum(r.wall_clock_seconds for r in log.records),
    }


def _mean(rows: list[dict[str, Any]], key: str) -> float:
    values = [row[key] for row in rows]
    return sum(values) / len(values)


def _trade_off_notes(
    entries: tuple[AlgorithmEntry, ...], components: dict[str, Any]
) -> list[str]:
    notes = []
    for entry in entries:
        if entry.base_name is None or entry.name not in components:
            continue
        if entry.base_name not in components:
            continue
        pfl, base = components[entry.name], components[entry.base_name]
        deltas = ", ".join(
            f"{key} {getattr(pfl, key) - getattr(base, key):+.3f}"
            for key in ("accuracy", "convergence", "comp_efficiency", "fairness")
        )
        notes.append(f"{entry.name} vs {entry.base_name}: {deltas}")
    return notes


def run_suite(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    log_line: Logger | None = None,
) -> tuple[dict[str, Any], bool]:
    """Run the whole configured suite; returns (report, all_completed).

    When out_dir is given, the report is written atomically to
    out_dir/report.json and per-round CSVs under out_dir/rounds/.
    """
    say = log_line or _quiet
    out_path = Path(out_dir) if out_dir is not None else None
    shards = materialize_shards(cfg)
    say(f"partitioned {sum(s.train.n_samples for s in shards)} train samples "
        f"across {len(shards)} clients")

    logs: dict[str, dict[int, ExperimentLog]] = {}
    per_seed_rows: dict[str, list[dict[str, Any]]] = {}
    failures: dict[str, str] = {}
    for entry in cfg.algorithms:
        logs[entry.name] = {}
        per_seed_rows[entry.name] = []
        for seed in cfg.seeds:
            started = time.perf_counter()
            run_cfg = run_config_for(cfg, entry, seed)
            log = run_experiment(shards, run_cfg)
            logs[entry.name][seed] = log
            elapsed = time.perf_counter() - started
            if not log.completed:
                failures[entry.name] = log.error or "diverged"
                say(f"{entry.name} seed {seed}: FAILED ({log.error})")
                continue
            if log.records:
                say(f"{entry.name} seed {seed}: "
                    f"final mean accuracy {log.records[-1].mean_client_accuracy:.3f} "
                    f"({elapsed:.1f}s)")
                per_seed_rows[entry.name].append(_seed_row(log, cfg, seed))
            else:
                say(f"{entry.name} seed {seed}: no rounds executed")
            if out_path is not None:
                _write_round_csv(out_path / "rounds" / f"{entry.name}_seed{seed}.csv", log)

    # personalization improvement needs the paired base run of the same seed
    for entry in cfg.algorithms:
        if entry.base_name is None:
            continue
        base_rows = {row["seed"]: row for row in per_seed_rows.get(entry.base_name, [])}
        for row in per_seed_rows[entry.name]:
            base = base_rows.get(row["seed"])
            if base is None:
                continue
            try:
                row["mpi"] = compute_mpi(
                    row["final_client_accuracies"], base["final_client_accuracies"]
                )
            except UndefinedMetricError:
                row["mpi"] = None

    mean_rows: dict[str, dict[str, Any]] = {}
    personalized = {e.name: e.personalizer.kind != NONE for e in cfg.algorithms}
    for entry in cfg.algorithms:
        rows = per_seed_rows[entry.name]
        if entry.name in failures or not rows:
            continue
        mpis = [row["mpi"] for row in rows if row["mpi"] is not None]
        mean_rows[entry.name] = {
            "accuracy": _mean(rows, "accuracy"),
            "first_crossing_round": _mean(rows, "first_crossing_round"),
            "tta": _mean(rows, "tta"),
            "entropy": _mean(rows, "entropy"),
            "mpi": (sum(mpis) / len(mpis)) if mpis else None,
        }

    components = (
        compute_component_indices(mean_rows, personalized, cfg.metrics) if mean_rows else {}
    )
    scores, bands, ranking = (
        score_components(components, cfg.importance) if components else ({}, {}, [])
    )

    algorithms_payload: dict[str, Any] = {}
    for entry in cfg.algorithms:
        name = entry.name
        completed = name in mean_rows
        payload: dict[str, Any] = {
            "personalized": personalized[name],
            "base_algorithm": entry.base_name,
            "completed": completed,
            "error": failures.get(name),
            "raw": None,
            "components": None,
            "hem_score": None,
            "band": None,
        }
        if completed:
            payload["raw"] = {"per_seed": per_seed_rows[name], "mean": mean_rows[name]}
            payload["components"] = components[name].as_dict()
            payload["hem_score"] = scores[name]
            payload["band"] = bands[name]
        algorithms_payload[name] = payload

    notes = _trade_off_notes(cfg.algorithms, components)
    for name, error in failures.items():
        notes.append(f"{name}: run failed and is excluded from comparative indices ({error})")

    report = {
        "schema_version": SCHEMA_VERSION,
        "config_fingerprint": cfg.fingerprint,
        "metric_config": {
            "target_accuracy": cfg.metrics.target_accuracy,
            "round_budget": cfg.metrics.round_budget,
            "accuracy_window": cfg.metrics.accuracy_window,
            "tta_clock": cfg.metrics.tta_clock,
        },
        "importance": importance_to_json(cfg.importance),
        "seeds": list(cfg.seeds),
        "num_clients": cfg.partition.num_clients,
        "algorithms": algorithms_payload,
        "ranking": ranking,
        "notes": notes,
    }
    if out_path is not None:
        write_report_atomic(report, out_path / "report.json")
        say(f"report written to {out_path / 'report.json'}")
    return report, not failures
