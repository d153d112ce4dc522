"""Declarative experiment configuration: a strict JSON document.

Unknown keys anywhere in the document are hard errors, so hyperparameter
typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .algorithms import StrategyConfig
from .errors import ConfigError
from .hem import ImportanceVector, importance_level, preset
from .metrics import MetricConfig
from .model import LINEAR, MLP, ModelSpec, SgdConfig
from .personalization import NONE, PersonalizerConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SyntheticDatasetConfig:
    num_classes: int
    n_features: int
    samples_per_class: int
    class_separation: float
    test_fraction: float
    seed: int


@dataclass(frozen=True)
class Cifar10DatasetConfig:
    train_files: tuple[str, ...]
    test_file: str


@dataclass(frozen=True)
class PartitionConfig:
    num_clients: int
    classes_per_client: int
    seed: int


@dataclass(frozen=True)
class FederationConfig:
    participation: float = 1.0
    eval_every: int = 1
    early_stop_accuracy: float | None = None


@dataclass(frozen=True)
class AlgorithmEntry:
    name: str
    strategy: StrategyConfig
    personalizer: PersonalizerConfig
    base_name: str | None = None  # resolved pairing for personalized entries


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: SyntheticDatasetConfig | Cifar10DatasetConfig
    partition: PartitionConfig
    model: ModelSpec
    training: SgdConfig
    federation: FederationConfig
    algorithms: tuple[AlgorithmEntry, ...]
    metrics: MetricConfig
    importance: ImportanceVector
    seeds: tuple[int, ...]
    output_dir: str
    fingerprint: str
    raw: dict = field(repr=False, default_factory=dict)


def _require(section: dict, name: str, keys: set[str], required: set[str]) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(section) - keys
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"missing keys in {name!r}: {sorted(missing)}")


def _as_int(section: dict, name: str, key: str) -> int:
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name}.{key} must be an integer, got {value!r}")
    return value


def _as_number(section: dict, name: str, key: str) -> float:
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number, got {value!r}")
    return float(value)


def _parse_dataset(section: dict) -> SyntheticDatasetConfig | Cifar10DatasetConfig:
    kind = section.get("kind")
    if kind == "synthetic":
        _require(
            section,
            "dataset",
            {"kind", "num_classes", "n_features", "samples_per_class",
             "class_separation", "test_fraction", "seed"},
            {"kind", "num_classes", "n_features", "samples_per_class",
             "class_separation", "test_fraction", "seed"},
        )
        return SyntheticDatasetConfig(
            num_classes=_as_int(section, "dataset", "num_classes"),
            n_features=_as_int(section, "dataset", "n_features"),
            samples_per_class=_as_int(section, "dataset", "samples_per_class"),
            class_separation=_as_number(section, "dataset", "class_separation"),
            test_fraction=_as_number(section, "dataset", "test_fraction"),
            seed=_as_int(section, "dataset", "seed"),
        )
    if kind == "cifar10":
        _require(section, "dataset", {"kind", "train_files", "test_file"},
                 {"kind", "train_files", "test_file"})
        train_files = section["train_files"]
        if not isinstance(train_files, list) or not train_files:
            raise ConfigError("dataset.train_files must be a nonempty list of paths")
        for path in [*train_files, section["test_file"]]:
            if not Path(path).is_file():
                raise ConfigError(f"dataset file not found: {path}")
        return Cifar10DatasetConfig(tuple(train_files), section["test_file"])
    raise ConfigError(f"dataset.kind must be 'synthetic' or 'cifar10', got {kind!r}")


def _parse_strategy(section: dict, name: str) -> StrategyConfig:
    _require(section, f"algorithms[{name}].strategy",
             {"kind", "feddyn_alpha", "server_lr"}, {"kind"})
    try:
        return StrategyConfig(
            kind=section["kind"],
            feddyn_alpha=section.get("feddyn_alpha"),
            server_lr=section.get("server_lr"),
        )
    except ValueError as exc:
        raise ConfigError(f"algorithms[{name}].strategy: {exc}") from exc


def _parse_personalizer(section: dict, name: str) -> PersonalizerConfig:
    _require(
        section,
        f"algorithms[{name}].personalizer",
        {"kind", "inner_lr", "inner_steps", "support_fraction", "embed_dim",
         "seed", "train_integrated"},
        {"kind"},
    )
    kwargs = {key: section[key] for key in section if key != "kind"}
    try:
        return PersonalizerConfig(kind=section["kind"], **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"algorithms[{name}].personalizer: {exc}") from exc


def _strategy_key(strategy: StrategyConfig) -> tuple:
    return (strategy.kind, strategy.feddyn_alpha, strategy.server_lr)


def _parse_algorithms(entries: list) -> tuple[AlgorithmEntry, ...]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("config needs at least one algorithm")
    parsed: list[AlgorithmEntry] = []
    names: set[str] = set()
    for entry in entries:
        _require(entry, "algorithms[]", {"name", "strategy", "personalizer"},
                 {"name", "strategy"})
        name = entry["name"]
        if not isinstance(name, str) or not name:
            raise ConfigError("algorithm name must be a nonempty string")
        if name in names:
            raise ConfigError(f"duplicate algorithm name {name!r}")
        names.add(name)
        strategy = _parse_strategy(entry["strategy"], name)
        personalizer = _parse_personalizer(entry.get("personalizer", {"kind": NONE}), name)
        parsed.append(AlgorithmEntry(name, strategy, personalizer))

    bases = {
        _strategy_key(e.strategy): e.name for e in parsed if e.personalizer.kind == NONE
    }
    resolved: list[AlgorithmEntry] = []
    for entry in parsed:
        if entry.personalizer.kind == NONE:
            resolved.append(entry)
            continue
        base = bases.get(_strategy_key(entry.strategy))
        if base is None:
            raise ConfigError(
                f"personalized algorithm {entry.name!r} has no matching base "
                "(same strategy with personalizer 'none') in the algorithm list"
            )
        resolved.append(AlgorithmEntry(entry.name, entry.strategy, entry.personalizer, base))
    return tuple(resolved)


def _parse_model(section: dict, n_features: int, num_classes: int) -> ModelSpec:
    _require(section, "model", {"kind", "hidden_units", "init_seed", "init_scale"}, {"kind"})
    if section["kind"] not in (LINEAR, MLP):
        raise ConfigError(f"model.kind must be 'linear' or 'mlp', got {section['kind']!r}")
    try:
        return ModelSpec(
            kind=section["kind"],
            n_features=n_features,
            num_classes=num_classes,
            hidden_units=section.get("hidden_units"),
            init_seed=section.get("init_seed", 0),
            init_scale=section.get("init_scale", 0.01),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def parse_importance(section: dict) -> ImportanceVector:
    """Build an importance vector from a config/CLI mapping of levels."""
    known = {"accuracy", "convergence", "comp_efficiency", "fairness", "personalization"}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown importance components: {sorted(unknown)}")
    missing = {"accuracy", "convergence", "comp_efficiency", "fairness"} - set(section)
    if missing:
        raise ConfigError(f"importance must set: {sorted(missing)}")
    try:
        levels = {key: importance_level(value) for key, value in section.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ImportanceVector(
        accuracy=levels["accuracy"],
        convergence=levels["convergence"],
        comp_efficiency=levels["comp_efficiency"],
        fairness=levels["fairness"],
        personalization=levels.get("personalization", 2.0),
        use_case_name="custom",
    )


def _parse_hem(section: dict) -> ImportanceVector:
    _require(section, "hem", {"use_case", "importance", "personalization_importance"}, set())
    if ("use_case" in section) == ("importance" in section):
        raise ConfigError("hem section needs exactly one of 'use_case' or 'importance'")
    if "use_case" in section:
        try:
            vector = preset(section["use_case"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if "personalization_importance" in section:
            level = importance_level(section["personalization_importance"])
            vector = ImportanceVector(
                vector.accuracy, vector.convergence, vector.comp_efficiency,
                vector.fairness, level, vector.use_case_name,
            )
        return vector
    if "personalization_importance" in section:
        raise ConfigError("set personalization inside 'importance' instead")
    return parse_importance(section["importance"])


def config_fingerprint(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


def parse_config(raw: dict) -> ExperimentConfig:
    _require(
        raw,
        "config",
        {"dataset", "partition", "model", "training", "federation", "algorithms",
         "metrics", "hem", "seeds", "output"},
        {"dataset", "partition", "model", "training", "algorithms", "metrics",
         "hem", "seeds", "output"},
    )
    dataset = _parse_dataset(raw["dataset"])

    part = raw["partition"]
    _require(part, "partition", {"num_clients", "classes_per_client", "seed"},
             {"num_clients", "classes_per_client", "seed"})
    try:
        partition = PartitionConfig(
            _as_int(part, "partition", "num_clients"),
            _as_int(part, "partition", "classes_per_client"),
            _as_int(part, "partition", "seed"),
        )
    except ValueError as exc:
        raise ConfigError(f"partition: {exc}") from exc

    if isinstance(dataset, SyntheticDatasetConfig):
        n_features, num_classes = dataset.n_features, dataset.num_classes
    else:
        n_features, num_classes = 3072, 10
    if partition.classes_per_client > num_classes:
        raise ConfigError("partition.classes_per_client exceeds the dataset class count")
    model = _parse_model(raw["model"], n_features, num_classes)

    train = raw["training"]
    _require(train, "training",
             {"learning_rate", "batch_size", "local_epochs", "weight_decay"}, set())
    try:
        training = SgdConfig(
            learning_rate=train.get("learning_rate", 0.05),
            batch_size=train.get("batch_size", 32),
            local_epochs=train.get("local_epochs", 1),
            weight_decay=train.get("weight_decay", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"training: {exc}") from exc

    fed = raw.get("federation", {})
    _require(fed, "federation", {"participation", "eval_every", "early_stop_accuracy"}, set())
    federation = FederationConfig(
        participation=fed.get("participation", 1.0),
        eval_every=fed.get("eval_every", 1),
        early_stop_accuracy=fed.get("early_stop_accuracy"),
    )

    algorithms = _parse_algorithms(raw["algorithms"])

    met = raw["metrics"]
    _require(met, "metrics",
             {"target_accuracy", "round_budget", "accuracy_window", "tta_clock"},
             {"target_accuracy", "round_budget"})
    try:
        metric_cfg = MetricConfig(
            target_accuracy=_as_number(met, "metrics", "target_accuracy"),
            round_budget=_as_int(met, "metrics", "round_budget"),
            accuracy_window=met.get("accuracy_window", 10),
            tta_clock=met.get("tta_clock", "cost_units"),
        )
    except ValueError as exc:
        raise ConfigError(f"metrics: {exc}") from exc

    importance = _parse_hem(raw["hem"])

    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(
        isinstance(s, int) and not isinstance(s, bool) for s in seeds
    ):
        raise ConfigError("seeds must be a nonempty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")

    out = raw["output"]
    _require(out, "output", {"dir"}, {"dir"})

    return ExperimentConfig(
        dataset=dataset,
        partition=partition,
        model=model,
        training=training,
        federation=federation,
        algorithms=algorithms,
        metrics=metric_cfg,
        importance=importance,
        seeds=tuple(seeds),
        output_dir=out["dir"],
        fingerprint=config_fingerprint(raw),
        raw=raw,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_config(raw)
