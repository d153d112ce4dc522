"""Deterministic federated-learning simulation and holistic evaluation.

The package simulates FedAvg / FedDyn / SCAFFOLD training (optionally with
meta-learning or prototype personalization) over non-IID client partitions,
computes five evaluation component indices from the logs, and composes them
into use-case-weighted holistic scores, bands, and rankings.
"""

from .data import (
    ClientShard,
    LabeledDataset,
    PartitionSpec,
    generate_synthetic,
    parse_cifar10_binary,
    partition,
)
from .errors import (
    ConfigError,
    DataFormatError,
    FedEvalError,
    NumericError,
    UndefinedMetricError,
)
from .fedsim import ExperimentLog, RoundRecord, RunConfig, run_experiment
from .hem import ImportanceVector, band, compose_hem, preset, rank
from .metrics import (
    ComponentIndices,
    MetricConfig,
    accuracy_index,
    comp_efficiency_indices,
    convergence_index,
    fairness_entropy,
    fairness_indices,
    personalization_indices,
    tta,
)
from .model import ModelParams, ModelSpec, SgdConfig, evaluate, init_params, loss_and_grad, sgd_train
from .personalization import (
    PersonalizerConfig,
    SupportQuerySplit,
    compute_mpi,
    maml_adapt,
    proto_adapt,
    support_query_split,
)

__version__ = "0.1.0"

__all__ = [
    "ClientShard",
    "ComponentIndices",
    "ConfigError",
    "DataFormatError",
    "ExperimentLog",
    "FedEvalError",
    "ImportanceVector",
    "LabeledDataset",
    "MetricConfig",
    "ModelParams",
    "ModelSpec",
    "NumericError",
    "PartitionSpec",
    "PersonalizerConfig",
    "RoundRecord",
    "RunConfig",
    "SgdConfig",
    "SupportQuerySplit",
    "UndefinedMetricError",
    "accuracy_index",
    "band",
    "comp_efficiency_indices",
    "compose_hem",
    "compute_mpi",
    "convergence_index",
    "evaluate",
    "fairness_entropy",
    "fairness_indices",
    "generate_synthetic",
    "init_params",
    "loss_and_grad",
    "maml_adapt",
    "parse_cifar10_binary",
    "partition",
    "personalization_indices",
    "preset",
    "proto_adapt",
    "rank",
    "run_experiment",
    "sgd_train",
    "support_query_split",
    "tta",
]
