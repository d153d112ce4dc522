"""Round-based federated training state machine.

Each round broadcasts the global model, runs the configured strategy's
client update for every participant, aggregates in client-id order, and then
evaluates the model every client would deploy on its local test set.

Cost accounting is deterministic: a round costs the sum of its participants'
per-example gradient evaluations plus AGGREGATION_COST_UNITS. Wall clock is
also recorded but is never part of any reproducibility contract.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import algorithms as alg
from . import personalization as pers
from .data import ClientShard
from .errors import NumericError
from .model import ModelParams, ModelSpec, SgdConfig, evaluate, init_params, sgd_train
from .personalization import PersonalizerConfig, SupportQuerySplit
from .seeding import derive_seed, make_rng

AGGREGATION_COST_UNITS = 1.0

_TAG_CLIENT = 0xC11E
_TAG_SAMPLE = 0x5E1EC7
_TAG_SPLIT = 0x5711


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs besides the client shards."""

    algorithm_name: str
    strategy: alg.StrategyConfig
    personalizer: PersonalizerConfig
    model: ModelSpec
    training: SgdConfig
    rounds: int
    seed: int = 0
    participation: float = 1.0
    eval_every: int = 1
    early_stop_accuracy: float | None = None
    keep_final_params: bool = False  # debugging aid, excluded from reports

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0.0 < self.participation <= 1.0:
            raise ValueError("participation must lie in (0, 1]")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class ClientState:
    """Per-client mutable state carried across rounds."""

    client_id: int
    shard: ClientShard
    algo_state: np.ndarray | None = None  # scaffold c_i / feddyn g_i
    split: SupportQuerySplit | None = None


@dataclass
class ServerState:
    """Server-side mutable state."""

    round: int
    global_params: ModelParams
    algo_state: np.ndarray | None  # scaffold c / feddyn h
    rng_seed: int
    num_clients: int = 0


@dataclass(frozen=True)
class RoundRecord:
    round: int
    client_accuracies: tuple[float, ...]
    mean_client_accuracy: float
    wall_clock_seconds: float
    cost_units: float

    def __post_init__(self):
        if not self.client_accuracies:
            raise ValueError("client_accuracies must be nonempty")
        mean = float(np.mean(self.client_accuracies))
        if abs(mean - self.mean_client_accuracy) > 1e-12:
            raise ValueError("mean_client_accuracy inconsistent with the accuracy list")
        if self.wall_clock_seconds < 0 or self.cost_units < 0:
            raise ValueError("wall clock and cost must be >= 0")


@dataclass(frozen=True)
class ExperimentLog:
    algorithm_name: str
    config_fingerprint: str
    records: tuple[RoundRecord, ...]
    completed: bool
    error: str | None = None
    num_clients: int = 0
    final_params: ModelParams | None = None  # only with cfg.keep_final_params


def client_update_seed(run_seed: int, round_num: int, client_id: int) -> int:
    """Seed for one client's local update in one round; strategy-independent."""
    return derive_seed(run_seed, _TAG_CLIENT, round_num, client_id)


def _evaluation_model_accuracy(
    global_params: ModelParams,
    spec: ModelSpec,
    client: ClientState,
    personalizer: PersonalizerConfig,
) -> float:
    """Accuracy of the model this client would deploy right now."""
    if personalizer.kind == pers.NONE:
        return evaluate(global_params, spec, client.shard.test)
    if personalizer.kind == pers.MAML:
        adapted = pers.maml_adapt(
            global_params,
            spec,
            client.split.support,
            personalizer.inner_lr,
            personalizer.inner_steps,
        )
        return evaluate(adapted, spec, client.shard.test)
    classifier = pers.proto_adapt(global_params, spec, client.split.support)
    return classifier.accuracy(client.shard.test)


def client_eval_pass(
    server: ServerState,
    clients: list[ClientState],
    personalizer: PersonalizerConfig,
    spec: ModelSpec,
) -> list[float]:
    """Per-client deployed-model accuracy, ordered by client id."""
    if not clients:
        raise ValueError("clients must be nonempty")
    ordered = sorted(clients, key=lambda c: c.client_id)
    return [
        _evaluation_model_accuracy(server.global_params, spec, client, personalizer)
        for client in ordered
    ]


def _select_participants(
    clients: list[ClientState], cfg: RunConfig, round_num: int
) -> list[ClientState]:
    if cfg.participation >= 1.0:
        return clients
    count = max(1, int(round(cfg.participation * len(clients))))
    rng = make_rng(cfg.seed, _TAG_SAMPLE, round_num)
    chosen = sorted(rng.choice(len(clients), size=count, replace=False).tolist())
    return [clients[i] for i in chosen]


def _data_and_grad_fn(
    client: ClientState, cfg: RunConfig
) -> tuple[object, alg.GradFn | None]:
    """The dataset driving the local loop and an optional gradient override."""
    p = cfg.personalizer
    if p.kind == pers.MAML and p.train_integrated:
        grad_fn = pers.meta_grad_fn(
            cfg.model, client.split.support, p.inner_lr, cfg.training.weight_decay
        )
        return client.split.query, grad_fn
    return client.shard.train, None


def _run_round(
    server: ServerState, participants: list[ClientState], cfg: RunConfig
) -> float:
    """Execute one strategy round in place; returns its training cost."""
    kind = cfg.strategy.kind
    global_values = server.global_params.values
    cost = 0.0

    if kind == alg.FEDAVG:
        updates = []
        for client in participants:
            seed = client_update_seed(cfg.seed, server.round, client.client_id)
            data, grad_fn = _data_and_grad_fn(client, cfg)
            if grad_fn is None:
                params, c = sgd_train(server.global_params, cfg.model, data, cfg.training, seed)
            else:
                params, c = pers.maml_client_update(
                    server.global_params, cfg.model, client.split, cfg.training,
                    cfg.personalizer.inner_lr, seed,
                )
            cost += c
            updates.append((params.values, client.shard.train.n_samples))
        new_values = alg.fedavg_aggregate(updates)
        server.global_params = server.global_params.replace_values(new_values)

    elif kind == alg.SCAFFOLD:
        deltas = []
        for client in participants:
            seed = client_update_seed(cfg.seed, server.round, client.client_id)
            data, grad_fn = _data_and_grad_fn(client, cfg)
            result = alg.scaffold_client_update(
                global_values, client.algo_state, server.algo_state,
                data, cfg.model, cfg.training, seed, grad_fn=grad_fn,
            )
            client.algo_state = result.new_client_control
            deltas.append((result.delta_y, result.delta_c))
            cost += result.cost_units
        new_values, new_control = alg.scaffold_server_update(
            global_values, server.algo_state, deltas,
            n_total=server.num_clients, server_lr=cfg.strategy.server_lr,
        )
        server.global_params = server.global_params.replace_values(new_values)
        server.algo_state = new_control

    else:  # feddyn
        thetas = []
        alpha = cfg.strategy.feddyn_alpha
        for client in participants:
            seed = client_update_seed(cfg.seed, server.round, client.client_id)
            data, grad_fn = _data_and_grad_fn(client, cfg)
            theta, new_state, c = alg.feddyn_client_update(
                global_values, client.algo_state, data, alpha,
                cfg.model, cfg.training, seed, grad_fn=grad_fn,
            )
            client.algo_state = new_state
            thetas.append(theta)
            cost += c
        new_values, new_state = alg.feddyn_server_update(
            server.algo_state, thetas, global_values, alpha, n_total=server.num_clients
        )
        server.global_params = server.global_params.replace_values(new_values)
        server.algo_state = new_state

    return cost + AGGREGATION_COST_UNITS


def run_experiment(shards: list[ClientShard], cfg: RunConfig) -> ExperimentLog:
    """Run the full round budget (or stop at the optional early-stop accuracy).

    Returns per-round records of every client's deployed-model accuracy plus
    deterministic cost units; on numeric divergence the partial log is
    returned with completed=False.
    """
    if not shards:
        raise ValueError("shards must be nonempty")
    spec = cfg.model
    needs_split = cfg.personalizer.kind != pers.NONE

    clients = []
    for shard in sorted(shards, key=lambda s: s.client_id):
        split = None
        if needs_split:
            split = pers.support_query_split(
                shard.train,
                shard.class_list,
                cfg.personalizer.support_fraction,
                derive_seed(cfg.personalizer.seed, _TAG_SPLIT, shard.client_id),
            )
        state = None
        if cfg.strategy.kind in (alg.SCAFFOLD, alg.FEDDYN):
            state = np.zeros(spec.param_count, dtype=np.float64)
        clients.append(ClientState(shard.client_id, shard, state, split))

    server = ServerState(
        round=0,
        global_params=init_params(spec),
        algo_state=(
            np.zeros(spec.param_count, dtype=np.float64)
            if cfg.strategy.kind in (alg.SCAFFOLD, alg.FEDDYN)
            else None
        ),
        rng_seed=cfg.seed,
        num_clients=len(clients),
    )

    records: list[RoundRecord] = []
    fingerprint = cfg.fingerprint()
    pending_cost = 0.0
    error: str | None = None
    completed = True

    for round_num in range(1, cfg.rounds + 1):
        started = time.perf_counter()
        server.round = round_num
        participants = _select_participants(clients, cfg, round_num)
        try:
            pending_cost += _run_round(server, participants, cfg)
        except NumericError as exc:
            error = f"round {round_num}: {exc}"
            completed = False
            break
        if round_num % cfg.eval_every != 0 and round_num != cfg.rounds:
            continue
        accuracies = client_eval_pass(server, clients, cfg.personalizer, spec)
        records.append(
            RoundRecord(
                round=round_num,
                client_accuracies=tuple(accuracies),
                mean_client_accuracy=float(np.mean(accuracies)),
                wall_clock_seconds=time.perf_counter() - started,
                cost_units=pending_cost,
            )
        )
        pending_cost = 0.0
        if (
            cfg.early_stop_accuracy is not None
            and records[-1].mean_client_accuracy >= cfg.early_stop_accuracy
        ):
            break

    return ExperimentLog(
        algorithm_name=cfg.algorithm_name,
        config_fingerprint=fingerprint,
        records=tuple(records),
        completed=completed,
        error=error,
        num_clients=len(clients),
        final_params=server.global_params if cfg.keep_final_params else None,
    )
