"""Config parsing, the pipeline, report self-audit, and the CLI surface."""

import json
from pathlib import Path

import pytest

from fedeval.cli import main
from fedeval.config import load_config, parse_config
from fedeval.errors import ConfigError
from fedeval.pipeline import run_suite
from fedeval.report import load_report, rescore_report, verify_report, write_report_atomic

FIXTURES = Path(__file__).parent / "fixtures"


def base_config(**overrides):
    cfg = {
        "dataset": {
            "kind": "synthetic", "num_classes": 6, "n_features": 8,
            "samples_per_class": 30, "class_separation": 3.0,
            "test_fraction": 0.25, "seed": 7,
        },
        "partition": {"num_clients": 6, "classes_per_client": 3, "seed": 11},
        "model": {"kind": "linear", "init_seed": 3, "init_scale": 0.01},
        "training": {"learning_rate": 0.1, "batch_size": 16, "local_epochs": 1},
        "algorithms": [
            {"name": "FedAvg", "strategy": {"kind": "fedavg"},
             "personalizer": {"kind": "none"}},
            {"name": "FedAvg_Proto", "strategy": {"kind": "fedavg"},
             "personalizer": {"kind": "proto"}},
        ],
        "metrics": {"target_accuracy": 0.8, "round_budget": 8, "accuracy_window": 4},
        "hem": {"use_case": "institution"},
        "seeds": [1, 2],
        "output": {"dir": "out"},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestConfigParsing:
    def test_round_trips(self):
        cfg = parse_config(base_config())
        assert cfg.metrics.round_budget == 8
        assert cfg.algorithms[1].base_name == "FedAvg"
        assert cfg.importance.use_case_name == "institution"

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(base_config(extra={"x": 1}))

    def test_unknown_section_key(self):
        raw = base_config()
        raw["training"]["momentum"] = 0.9
        with pytest.raises(ConfigError, match="momentum"):
            parse_config(raw)

    def test_missing_required_section(self):
        raw = base_config()
        del raw["metrics"]
        with pytest.raises(ConfigError, match="metrics"):
            parse_config(raw)

    def test_pfl_without_base_rejected(self):
        raw = base_config()
        raw["algorithms"] = [
            {"name": "solo", "strategy": {"kind": "scaffold"},
             "personalizer": {"kind": "proto"}},
        ]
        with pytest.raises(ConfigError, match="no matching base"):
            parse_config(raw)

    def test_duplicate_names_rejected(self):
        raw = base_config()
        raw["algorithms"].append(raw["algorithms"][0])
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(raw)

    def test_classes_per_client_capped_by_dataset(self):
        raw = base_config()
        raw["partition"]["classes_per_client"] = 7
        with pytest.raises(ConfigError, match="exceeds"):
            parse_config(raw)

    def test_hem_needs_exactly_one_source(self):
        with pytest.raises(ConfigError):
            parse_config(base_config(hem={}))
        with pytest.raises(ConfigError):
            parse_config(base_config(hem={
                "use_case": "iot",
                "importance": {"accuracy": 1, "convergence": 1,
                               "comp_efficiency": 1, "fairness": 1},
            }))

    def test_custom_importance_with_names(self):
        cfg = parse_config(base_config(hem={"importance": {
            "accuracy": "high", "convergence": "low",
            "comp_efficiency": "low", "fairness": "high",
        }}))
        assert cfg.importance.accuracy == 3.0
        assert cfg.importance.fairness == 3.0

    def test_bad_seed_types_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(base_config(seeds=[1, "2"]))
        with pytest.raises(ConfigError):
            parse_config(base_config(seeds=[]))

    def test_missing_cifar_file_rejected(self):
        raw = base_config(dataset={
            "kind": "cifar10", "train_files": ["/nonexistent/a.bin"],
            "test_file": "/nonexistent/b.bin",
        })
        with pytest.raises(ConfigError, match="not found"):
            parse_config(raw)

    def test_load_config_rejects_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="valid JSON"):
            load_config(path)


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("suite")
    cfg = parse_config(base_config())
    report, ok = run_suite(cfg, tmp)
    return report, ok, tmp


class TestRunSuite:
    def test_completes_and_ranks(self, suite):
        report, ok, _ = suite
        assert ok
        assert len(report["ranking"]) == 2
        assert set(report["algorithms"]) == {"FedAvg", "FedAvg_Proto"}

    def test_report_written_with_round_csvs(self, suite):
        _, _, tmp = suite
        assert (tmp / "report.json").is_file()
        csvs = sorted(p.name for p in (tmp / "rounds").glob("*.csv"))
        assert csvs == [
            "FedAvg_Proto_seed1.csv", "FedAvg_Proto_seed2.csv",
            "FedAvg_seed1.csv", "FedAvg_seed2.csv",
        ]
        header = (tmp / "rounds" / csvs[0]).read_text().splitlines()[0]
        assert header == "round,client_id,accuracy,cost_units,wall_clock"

    def test_self_audit_passes(self, suite):
        _, _, tmp = suite
        assert verify_report(load_report(tmp / "report.json")) == []

    def test_personalization_index_only_for_pfl(self, suite):
        report, _, _ = suite
        assert report["algorithms"]["FedAvg"]["components"]["personalization"] is None
        assert report["algorithms"]["FedAvg_Proto"]["components"]["personalization"] == 0.5

    def test_mpi_recorded_per_seed(self, suite):
        report, _, _ = suite
        rows = report["algorithms"]["FedAvg_Proto"]["raw"]["per_seed"]
        assert all(row["mpi"] is not None for row in rows)

    def test_corrupted_report_fails_audit(self, suite):
        _, _, tmp = suite
        report = load_report(tmp / "report.json")
        name = report["ranking"][0]
        report["algorithms"][name]["components"]["accuracy"] = 0.123
        assert any("accuracy" in p for p in verify_report(report))


class TestDeterminism:
    def test_reports_identical_modulo_wall_clock(self, tmp_path):
        cfg = parse_config(base_config())
        report_a, _ = run_suite(cfg, tmp_path / "a")
        report_b, _ = run_suite(cfg, tmp_path / "b")

        def strip(report):
            payload = json.loads(json.dumps(report))
            for entry in payload["algorithms"].values():
                if entry["raw"] is None:
                    continue
                for row in entry["raw"]["per_seed"]:
                    row.pop("wall_clock_seconds")
            return payload

        assert strip(report_a) == strip(report_b)

    def test_wall_clock_is_the_only_difference_on_disk(self, tmp_path):
        cfg = parse_config(base_config())
        run_suite(cfg, tmp_path / "x")
        run_suite(cfg, tmp_path / "y")
        a = json.loads((tmp_path / "x" / "report.json").read_text())
        b = json.loads((tmp_path / "y" / "report.json").read_text())
        for payload in (a, b):
            for entry in payload["algorithms"].values():
                for row in (entry["raw"] or {}).get("per_seed", []):
                    row["wall_clock_seconds"] = 0.0
        assert a == b


class TestRescore:
    def test_reference_fixture_institution(self):
        report = load_report(FIXTURES / "reference_report.json")
        assert report["ranking"][0] == "FedAvg"
        top = report["algorithms"]["FedAvg"]
        assert abs(top["hem_score"] - 0.79) <= 0.005
        assert top["band"] == "Good"

    def test_rescore_to_iot(self):
        from fedeval.hem import preset

        report = load_report(FIXTURES / "reference_report.json")
        rescored = rescore_report(report, preset("iot"))
        scores = {n: e["hem_score"] for n, e in rescored["algorithms"].items()}
        assert rescored["ranking"][0] == "FedDyn_Proto"
        assert scores["FedDyn_Proto"] == pytest.approx(0.707, abs=1e-12)
        assert scores["FedDyn_MAML"] == pytest.approx(0.529, abs=1e-12)
        assert scores["FedAvg_MAML"] == pytest.approx(0.519, abs=1e-12)

    def test_rescore_leaves_raw_untouched(self, tmp_path):
        from fedeval.hem import preset

        cfg = parse_config(base_config())
        report, _ = run_suite(cfg, tmp_path)
        rescored = rescore_report(report, preset("smartphone"))
        for name in report["algorithms"]:
            assert rescored["algorithms"][name]["raw"] == report["algorithms"][name]["raw"]
            assert (rescored["algorithms"][name]["components"]
                    == report["algorithms"][name]["components"])


class TestAtomicWrite:
    def test_no_temp_files_left(self, tmp_path):
        write_report_atomic({"schema_version": 1, "algorithms": {}}, tmp_path / "r.json")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["r.json"]

    def test_failed_serialization_leaves_no_target(self, tmp_path):
        with pytest.raises(TypeError):
            write_report_atomic({"bad": object()}, tmp_path / "r.json")
        assert not (tmp_path / "r.json").exists()
        assert list(tmp_path.iterdir()) == []


class TestCli:
    def test_run_verify_exit_zero(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(output={"dir": str(tmp_path / "out")}))
        assert main(["run", "--config", str(path), "--verify"]) == 0
        out = capsys.readouterr().out
        assert "self-consistent" in out

    def test_run_with_seed_override(self, tmp_path):
        path = write_config(tmp_path, base_config(output={"dir": str(tmp_path / "out")}))
        assert main(["run", "--config", str(path), "--seeds", "5"]) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["seeds"] == [5]

    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(seeds=[]))
        assert main(["run", "--config", str(path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_hem_subcommand(self, capsys):
        code = main(["hem", str(FIXTURES / "reference_report.json"), "--use-case", "iot"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["ranking"][0] == "FedDyn_Proto"

    def test_hem_uniform_importance_on_equal_indices(self, tmp_path, capsys):
        from fedeval.hem import preset
        from fedeval.metrics import ComponentIndices, MetricConfig
        from fedeval.report import external_indices_report

        report = external_indices_report(
            {"a": ComponentIndices(0.6, 0.6, 0.6, 0.6),
             "b": ComponentIndices(0.6, 0.6, 0.6, 0.6)},
            preset("iot"), MetricConfig(),
        )
        path = tmp_path / "fixture.json"
        write_report_atomic(report, path)
        code = main(["hem", str(path), "--importance",
                     "accuracy=1,convergence=1,comp_efficiency=1,fairness=1"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["algorithms"]["a"]["hem_score"] == pytest.approx(0.6)
        assert payload["algorithms"]["b"]["hem_score"] == pytest.approx(0.6)

    def test_hem_requires_importance_source(self, capsys):
        code = main(["hem", str(FIXTURES / "reference_report.json")])
        assert code == 2

    def test_partition_inspect(self, tmp_path, capsys):
        cfg = base_config()
        cfg["dataset"].update(num_classes=10, samples_per_class=20)
        cfg["partition"].update(num_clients=10, classes_per_client=5)
        path = write_config(tmp_path, cfg)
        assert main(["partition-inspect", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "{7,8,9,0,1}" in out
        # totals line equals the dataset size
        total_line = [l for l in out.splitlines() if l.strip().startswith("total")][0]
        train_total, test_total = [int(x) for x in total_line.split()[-2:]]
        assert train_total + test_total == 10 * 20

    def test_partition_inspect_singletons(self, tmp_path, capsys):
        cfg = base_config()
        cfg["partition"].update(classes_per_client=1)
        path = write_config(tmp_path, cfg)
        assert main(["partition-inspect", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "{0}" in out and "{5}" in out

    def test_verify_subcommand_detects_corruption(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, base_config(output={"dir": str(tmp_path / "out")}))
        assert main(["run", "--config", str(cfg_path)]) == 0
        report_path = tmp_path / "out" / "report.json"
        assert main(["verify", str(report_path)]) == 0
        payload = json.loads(report_path.read_text())
        first = payload["ranking"][0]
        payload["algorithms"][first]["hem_score"] = 0.999
        report_path.write_text(json.dumps(payload))
        assert main(["verify", str(report_path)]) == 1

    def test_verify_rejects_wrong_schema_version(self, tmp_path, capsys):
        path = tmp_path / "r.json"
        path.write_text(json.dumps({"schema_version": 99, "algorithms": {}}))
        assert main(["verify", str(path)]) == 2

    def test_divergent_run_annotated_and_nonzero_exit(self, tmp_path, capsys):
        cfg = base_config(output={"dir": str(tmp_path / "out")})
        cfg["training"]["learning_rate"] = 1e308  # overflows on the first step
        path = write_config(tmp_path, cfg)
        assert main(["run", "--config", str(path)]) == 1
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert all(not entry["completed"] for entry in report["algorithms"].values())
        assert all(entry["hem_score"] is None for entry in report["algorithms"].values())
        assert any("excluded from comparative" in note for note in report["notes"])
