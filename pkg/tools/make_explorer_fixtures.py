"""Generate the explorer conformance fixtures from the core scoring code.

Produces frontend/tests/fixtures/conformance.json: a set of reports plus,
for each report, re-scored expectations (scores, bands, ranking) under the
three presets and twenty seeded random importance vectors. The explorer's
scoring must match these within 1e-9.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from fedeval.config import parse_config
from fedeval.hem import ImportanceVector, USE_CASE_PRESETS
from fedeval.pipeline import run_suite
from fedeval.report import load_report, rescore_report

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "frontend" / "tests" / "fixtures"

DESK_CONFIG = {
    "dataset": {"kind": "synthetic", "num_classes": 10, "n_features": 16,
                "samples_per_class": 60, "class_separation": 2.3,
                "test_fraction": 0.25, "seed": 28},
    "partition": {"num_clients": 20, "classes_per_client": 5, "seed": 11},
    "model": {"kind": "linear", "init_seed": 3, "init_scale": 0.01},
    "training": {"learning_rate": 0.1, "batch_size": 32, "local_epochs": 1},
    "algorithms": [
        {"name": "FedAvg", "strategy": {"kind": "fedavg"}, "personalizer": {"kind": "none"}},
        {"name": "SCAFFOLD", "strategy": {"kind": "scaffold"}, "personalizer": {"kind": "none"}},
        {"name": "FedAvg_Proto", "strategy": {"kind": "fedavg"},
         "personalizer": {"kind": "proto", "support_fraction": 0.25, "seed": 0}},
        {"name": "FedAvg_MAML", "strategy": {"kind": "fedavg"},
         "personalizer": {"kind": "maml", "inner_lr": 0.5, "inner_steps": 3,
                          "support_fraction": 0.5, "seed": 0}},
    ],
    "metrics": {"target_accuracy": 0.8, "round_budget": 12, "accuracy_window": 5},
    "hem": {"use_case": "institution"},
    "seeds": [1, 2],
    "output": {"dir": "unused"},
}


def random_importance(rng: np.random.Generator) -> ImportanceVector:
    levels = rng.uniform(0.0, 4.0, size=5)
    levels[int(rng.integers(0, 4))] += 0.5  # keep at least one clearly positive
    return ImportanceVector(
        accuracy=float(levels[0]),
        convergence=float(levels[1]),
        comp_efficiency=float(levels[2]),
        fairness=float(levels[3]),
        personalization=float(levels[4]),
        use_case_name="random",
    )


def expectations(report: dict, vectors: list[ImportanceVector]) -> list[dict]:
    rows = []
    for vector in vectors:
        rescored = rescore_report(report, vector)
        rows.append({
            "importance": vector.as_dict(),
            "use_case_name": vector.use_case_name,
            "scores": {
                name: entry["hem_score"]
                for name, entry in rescored["algorithms"].items()
                if entry["hem_score"] is not None
            },
            "bands": {
                name: entry["band"]
                for name, entry in rescored["algorithms"].items()
                if entry["band"] is not None
            },
            "ranking": rescored["ranking"],
        })
    return rows


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)

    reference = load_report(ROOT / "tests" / "fixtures" / "reference_report.json")
    desk_report, ok = run_suite(parse_config(DESK_CONFIG))
    assert ok, "fixture suite failed"

    rng = np.random.default_rng(20240817)
    vectors = list(USE_CASE_PRESETS.values()) + [random_importance(rng) for _ in range(20)]

    payload = {
        "tolerance": 1e-9,
        "cases": [
            {"label": "reference", "report": reference,
             "expected": expectations(reference, vectors)},
            {"label": "desk", "report": desk_report,
             "expected": expectations(desk_report, vectors)},
        ],
    }
    out_path = OUT / "conformance.json"
    out_path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
