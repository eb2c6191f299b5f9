"""Command-line entry point.

Subcommands cover both engines: `simulate`, `verify-theorems`, `figure3`, and
`gen-instance` drive the exact discrete simulator; `train` and `gen-dataset`
drive the neural expanding-dataset runner. Exit codes: 0 success, 1
configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

import numpy as np

from .instances import (
    fixed_spec_from_toml,
    gen_fixed_instance,
    schedule_to_json,
)
from .runner import (
    config_from_toml,
    emit_results,
    load_chunks,
    run_expanding,
    run_sweep,
)
from .strategies import CSV_HEADER, STRATEGIES, accuracy_exact, run_strategy
from .theorems import run_figure3_experiment, run_verification_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFICATION = 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract reserves 2 for
    # verification failures, so remap usage errors to 1
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")


def _resolve_seed(flag_seed: Optional[int], default: int = 0) -> int:
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("PLASTICITY_LAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PLASTICITY_LAB_SEED is not an integer: {env!r}")
    return default


def _cmd_simulate(args) -> int:
    doc = _load_toml(args.config)
    cfg, spec = fixed_spec_from_toml(doc)
    experiments = args.experiments or doc.get("experiments", 10)
    seed = _resolve_seed(args.seed, doc.get("seed", 0))
    rng = random.Random(seed)
    schedule = gen_fixed_instance(spec, experiments, rng)
    pop = spec.population()
    strategies = STRATEGIES if args.strategy == "all" else (args.strategy,)
    lines = [CSV_HEADER]
    for strategy in strategies:
        records = run_strategy(
            strategy, schedule, cfg,
            accuracy_fn=lambda learned: accuracy_exact(learned, pop, cfg),
        )
        lines.extend(r.csv_row(strategy, seed) for r in records)
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_verify_theorems(args) -> int:
    seed = _resolve_seed(args.seed)
    suite = run_verification_suite(
        args.instances, seed, j_max=args.max_experiments
    )
    _write_text(args.out, json.dumps(suite, indent=2) + "\n")
    return EXIT_OK if suite["all_passed"] else EXIT_VERIFICATION


def _cmd_figure3(args) -> int:
    report = run_figure3_experiment(
        args.seeds,
        base_seed=_resolve_seed(args.seed),
        num_experiments=args.experiments,
        chunk_size=args.chunk_size,
        test_size=args.test_size,
    )
    _write_text(args.out, json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _cmd_train(args) -> int:
    doc = _load_toml(args.config)
    if doc.get("mode", "neural") != "neural":
        raise ConfigError(
            "train requires mode = 'neural'; framework mode runs via simulate"
        )
    config = config_from_toml(doc, seed_override=args.seed)
    sweep = doc.get("sweep")
    if sweep:
        labeled = run_sweep(
            config,
            sweep.get("methods", [config.method]),
            sweep.get("seeds", [config.seed]),
            workers=args.workers,
        )
        emit_results([], config, args.out, labeled_rows=labeled)
    else:
        rows = run_expanding(config)
        emit_results(rows, config, args.out)
    return EXIT_OK


def _cmd_gen_instance(args) -> int:
    doc = _load_toml(args.config)
    _, spec = fixed_spec_from_toml(doc)
    experiments = args.experiments or doc.get("experiments", 10)
    rng = random.Random(_resolve_seed(args.seed, doc.get("seed", 0)))
    schedule = gen_fixed_instance(spec, experiments, rng)
    _write_text(args.out, schedule_to_json(schedule) + "\n")
    return EXIT_OK


def _dataset_csv(features: np.ndarray, labels: np.ndarray) -> str:
    header = ",".join(f"f{i}" for i in range(features.shape[1])) + ",label"
    lines = [header]
    for row, label in zip(features, labels):
        lines.append(",".join(repr(float(v)) for v in row) + f",{int(label)}")
    return "\n".join(lines) + "\n"


def _cmd_gen_dataset(args) -> int:
    doc = _load_toml(args.config)
    config = config_from_toml(doc, seed_override=args.seed)
    rng = np.random.default_rng(config.seed)
    chunks, test = load_chunks(config, rng)
    os.makedirs(args.out, exist_ok=True)
    train_x = np.concatenate([c.features for c in chunks])
    train_y = np.concatenate([c.labels for c in chunks])
    _write_text(os.path.join(args.out, "train.csv"), _dataset_csv(train_x, train_y))
    _write_text(os.path.join(args.out, "test.csv"), _dataset_csv(test.features, test.labels))
    return EXIT_OK


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plasticity-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run restart strategies on a fixed-count instance")
    p.add_argument("--config", required=True, help="instance TOML")
    p.add_argument("--experiments", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--strategy", choices=("all",) + STRATEGIES, default="all")
    p.add_argument("--out", default="records.csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify-theorems", help="run the theorem/lemma verification suite")
    p.add_argument("--instances", type=int, default=25)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-experiments", type=int, default=12)
    p.add_argument("--out", default="report.json")
    p.set_defaults(func=_cmd_verify_theorems)

    p = sub.add_parser("figure3", help="strategy comparison on the Bernoulli synthetic setup")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--experiments", type=int, default=50)
    p.add_argument("--chunk-size", type=int, default=1000)
    p.add_argument("--test-size", type=int, default=10_000)
    p.add_argument("--out", default="figure3.json")
    p.set_defaults(func=_cmd_figure3)

    p = sub.add_parser("train", help="neural expanding-dataset run")
    p.add_argument("--config", required=True, help="run TOML")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="results")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("gen-instance", help="materialize a fixed-count schedule as JSON")
    p.add_argument("--config", required=True, help="instance TOML")
    p.add_argument("--experiments", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="instance.json")
    p.set_defaults(func=_cmd_gen_instance)

    p = sub.add_parser("gen-dataset", help="write a synthetic dataset as CSV")
    p.add_argument("--config", required=True, help="run TOML")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="dataset")
    p.set_defaults(func=_cmd_gen_dataset)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
