"""Command-line interface.

Subcommands:
  run                Execute the configured suite and write the report.
  hem                Re-score an existing report under a new importance vector.
  partition-inspect  Print the client/class assignment table for a config.
  verify             Self-audit a report file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, parse_importance
from .errors import ConfigError, FedEvalError
from .hem import ImportanceVector, preset
from .pipeline import materialize_shards, run_suite
from .report import load_report, rescore_report, verify_report


def _parse_importance_flag(text: str) -> dict[str, str]:
    pairs = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ConfigError(f"importance entries must look like name=level, got {chunk!r}")
        key, value = chunk.split("=", 1)
        pairs[key.strip()] = value.strip()
    if not pairs:
        raise ConfigError("empty --importance value")
    return pairs


def _importance_from_flags(args: argparse.Namespace) -> ImportanceVector | None:
    if getattr(args, "use_case", None) and getattr(args, "importance", None):
        raise ConfigError("use either --use-case or --importance, not both")
    if getattr(args, "use_case", None):
        return preset(args.use_case)
    if getattr(args, "importance", None):
        return parse_importance(_parse_importance_flag(args.importance))
    return None


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    changes = {}
    importance = _importance_from_flags(args)
    if importance is not None:
        changes["importance"] = importance
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
        if not seeds:
            raise ConfigError("--seeds must list at least one integer")
        changes["seeds"] = seeds
    if args.out:
        changes["output_dir"] = args.out
    return dataclasses.replace(cfg, **changes) if changes else cfg


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out_dir = Path(cfg.output_dir)
    report, all_completed = run_suite(cfg, out_dir, log_line=print)
    if args.verify:
        problems = verify_report(load_report(out_dir / "report.json"))
        if problems:
            for problem in problems:
                print(f"verify: {problem}", file=sys.stderr)
            return 1
        print("verify: report is self-consistent")
    if not all_completed:
        print("one or more runs failed; see report notes", file=sys.stderr)
        return 1
    return 0


def cmd_hem(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    importance = _importance_from_flags(args)
    if importance is None:
        raise ConfigError("hem needs --use-case or --importance")
    rescored = rescore_report(report, importance)
    json.dump(rescored, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def cmd_partition_inspect(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    shards = materialize_shards(cfg)
    print(f"{'client':>6}  {'classes':<24} {'train':>7} {'test':>7}")
    for shard in shards:
        classes = ",".join(str(c) for c in shard.class_list)
        print(f"{shard.client_id:>6}  {{{classes}}}{'':<{max(0, 22 - len(classes))}} "
              f"{shard.train.n_samples:>7} {shard.test.n_samples:>7}")
    total_train = sum(s.train.n_samples for s in shards)
    total_test = sum(s.test.n_samples for s in shards)
    print(f"{'total':>6}  {'':<24} {total_train:>7} {total_test:>7}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    problems = verify_report(load_report(args.report))
    if problems:
        for problem in problems:
            print(f"verify: {problem}", file=sys.stderr)
        return 1
    print("verify: report is self-consistent")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedeval",
        description="Deterministic FL simulation and use-case-weighted holistic evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured algorithm suite")
    run.add_argument("--config", required=True, help="path to the JSON config")
    run.add_argument("--out", help="output directory (overrides config output.dir)")
    run.add_argument("--seeds", help="comma-separated seed list override")
    run.add_argument("--use-case", help="importance preset: iot, smartphone, institution")
    run.add_argument("--importance", help="custom importance, e.g. accuracy=3,convergence=1,...")
    run.add_argument("--verify", action="store_true", help="self-audit the emitted report")
    run.set_defaults(func=cmd_run)

    hem = sub.add_parser("hem", help="re-score an existing report")
    hem.add_argument("report", help="path to a report.json")
    hem.add_argument("--use-case", help="importance preset: iot, smartphone, institution")
    hem.add_argument("--importance", help="custom importance, e.g. accuracy=3,...")
    hem.set_defaults(func=cmd_hem)

    inspect = sub.add_parser("partition-inspect", help="print the class assignment table")
    inspect.add_argument("--config", required=True, help="path to the JSON config")
    inspect.set_defaults(func=cmd_partition_inspect)

    verify = sub.add_parser("verify", help="self-audit a report file")
    verify.add_argument("report", help="path to a report.json")
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FedEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
