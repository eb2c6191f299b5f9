"""Expanding-dataset orchestration for the neural engine: configuration,
method dispatch (cold / warm / warm with momentum reset / shrink-and-perturb /
direction-aware shrinking), and CSV/JSON result emission."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .datasets import (
    SyntheticFeatureNoiseSpec,
    concat_datasets,
    gen_feature_noise_dataset,
    load_csv_dataset,
    split_chunks,
)
from .nn import (
    DenseNet,
    LabeledDataset,
    OptimState,
    TrainControl,
    evaluate_accuracy,
    init_net,
    train_until,
)
from .reinit import (
    DashConfig,
    SpConfig,
    dash_apply,
    ema_chunk_gradients,
    momentum_reset,
    sp_apply,
)

METHODS = ("cold", "warm", "warm_rem", "sp", "dash")

RESULTS_CSV_HEADER = "method,seed,experiment,test_acc,steps,converged,wall_ms"


@dataclass
class DatasetConfig:
    source: str  # "synthetic" | "csv"
    path: Optional[str] = None
    test_path: Optional[str] = None
    test_size: Optional[int] = None
    synthetic: Optional[SyntheticFeatureNoiseSpec] = None


@dataclass
class RunConfig:
    method: str = "cold"
    seed: int = 0
    chunk_count: int = 50
    hidden_dims: list[int] = field(default_factory=lambda: [64, 64])
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 128
    control: TrainControl = field(default_factory=TrainControl)
    dash: DashConfig = field(default_factory=DashConfig)
    sp: SpConfig = field(default_factory=SpConfig)
    sp_interval: int = 1
    dataset: Optional[DatasetConfig] = None
    raw: dict = field(default_factory=dict)  # parsed config document, for the manifest

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.chunk_count < 1:
            raise ValueError("chunk_count must be >= 1")
        if self.dash.alpha == 0.0 and self.dash.interval <= 1:
            raise ValueError("alpha = 0 is only meaningful in interval mode")


@dataclass
class ResultRow:
    experiment_index: int
    test_accuracy: float
    steps_to_converge: int
    converged: bool
    wall_ms: float

    def csv_row(self, method: str, seed: int) -> str:
        return (
            f"{method},{seed},{self.experiment_index},{self.test_accuracy!r},"
            f"{self.steps_to_converge},{int(self.converged)},{self.wall_ms:.3f}"
        )


def config_from_toml(doc: dict, seed_override: Optional[int] = None) -> RunConfig:
    """Build a RunConfig from a parsed TOML document; the lambda/sigma config
    keys map onto the shrink parameters."""
    ds_doc = doc.get("dataset", {})
    synthetic = None
    if ds_doc.get("source", "synthetic") == "synthetic":
        probs = ds_doc.get("inclusion_probs")
        if probs is None:
            probs = [ds_doc.get("inclusion_prob", 0.5)] * ds_doc.get("features_per_class", 4)
        synthetic = SyntheticFeatureNoiseSpec(
            num_classes=ds_doc.get("num_classes", 4),
            features_per_class=ds_doc.get("features_per_class", len(probs)),
            feature_strength=ds_doc.get("feature_strength", 1.0),
            noise_dims=ds_doc.get("noise_dims", 16),
            noise_strength=ds_doc.get("noise_strength", 1.0),
            points_per_chunk=ds_doc.get("points_per_chunk", 128),
            inclusion_probs=tuple(probs),
        )
    dataset = DatasetConfig(
        source=ds_doc.get("source", "synthetic"),
        path=ds_doc.get("path"),
        test_path=ds_doc.get("test_path"),
        test_size=ds_doc.get("test_size"),
        synthetic=synthetic,
    )
    opt = doc.get("optimizer", {})
    tr = doc.get("train", {})
    dash_doc = doc.get("dash", {})
    sp_doc = doc.get("sp", {})
    seed = doc.get("seed", 0)
    env_seed = os.environ.get("PLASTICITY_LAB_SEED")
    if env_seed is not None:
        seed = int(env_seed)
    if seed_override is not None:
        seed = seed_override
    return RunConfig(
        method=doc.get("method", "cold"),
        seed=seed,
        chunk_count=doc.get("chunk_count", 50),
        hidden_dims=list(doc.get("net", {}).get("hidden", [64, 64])),
        learning_rate=opt.get("learning_rate", 0.01),
        momentum=opt.get("momentum", 0.9),
        batch_size=opt.get("batch_size", 128),
        control=TrainControl(
            target_train_accuracy=tr.get("target_train_accuracy", 0.999),
            max_steps=tr.get("max_steps", 200_000),
            eval_interval=tr.get("eval_interval", 50),
        ),
        dash=DashConfig(
            alpha=dash_doc.get("alpha", 0.3),
            min_shrink=dash_doc.get("lambda", 0.3),
            interval=dash_doc.get("interval", 1),
        ),
        sp=SpConfig(
            shrink=sp_doc.get("lambda", 0.3),
            noise_std=sp_doc.get("sigma", 0.01),
        ),
        sp_interval=sp_doc.get("interval", 1),
        dataset=dataset,
        raw=doc,
    )


def load_chunks(config: RunConfig, rng: np.random.Generator) -> tuple[list[LabeledDataset], LabeledDataset]:
    ds = config.dataset
    if ds is None:
        raise ValueError("no dataset configured")
    if ds.source == "synthetic":
        return gen_feature_noise_dataset(
            ds.synthetic, config.chunk_count, rng, test_size=ds.test_size
        )
    if ds.source == "csv":
        if ds.path is None:
            raise ValueError("csv dataset needs a path")
        train = load_csv_dataset(ds.path)
        chunks = split_chunks(train, config.chunk_count)
        if ds.test_path is not None:
            test = load_csv_dataset(ds.test_path)
        else:
            # no held-out file: carve the trailing chunk off as test data
            if config.chunk_count < 2:
                raise ValueError("csv dataset without test_path needs >= 2 chunks")
            test = chunks.pop()
        return chunks, test
    raise ValueError(f"unknown dataset source {ds.source!r}")


def _interval_due(j: int, interval: int) -> bool:
    return interval == 1 or j % interval == 0


def run_expanding(
    config: RunConfig,
    chunks: Optional[list[LabeledDataset]] = None,
    test: Optional[LabeledDataset] = None,
) -> list[ResultRow]:
    """Run the expanding-dataset protocol for one (method, seed) job.

    Experiment j trains on chunks 1..j until the convergence target. The
    method's reinitialization runs strictly before any training step of the
    experiment; no event occurs before the first experiment, so all methods
    coincide at chunk_count = 1 under a shared seed.
    """
    rng = np.random.default_rng(config.seed)
    if chunks is None or test is None:
        chunks, test = load_chunks(config, rng)
    chunk_count = len(chunks)
    dims = [chunks[0].dimension] + config.hidden_dims + [int(test.labels.max()) + 1]
    net = init_net(dims, rng)
    opt = OptimState.for_net(net, config.learning_rate, config.momentum, config.batch_size)

    rows: list[ResultRow] = []
    for j in range(1, chunk_count + 1):
        start = time.perf_counter()
        if j > 1:
            if config.method == "cold":
                net = init_net(dims, rng)
                opt = OptimState.for_net(
                    net, config.learning_rate, config.momentum, config.batch_size
                )
            elif config.method == "warm_rem":
                momentum_reset(opt)
            elif config.method == "sp" and _interval_due(j, config.sp_interval):
                sp_apply(net, config.sp, rng)
            elif config.method == "dash" and _interval_due(j, config.dash.interval):
                ema = ema_chunk_gradients(
                    net, chunks[:j], config.dash.alpha, config.batch_size
                )
                dash_apply(net, ema, config.dash.min_shrink)
        train_data = concat_datasets(chunks[:j])
        steps, converged = train_until(net, opt, train_data, config.control, rng)
        acc = evaluate_accuracy(net, test)
        wall_ms = (time.perf_counter() - start) * 1000.0
        rows.append(ResultRow(j, acc, steps, converged, wall_ms))
    return rows


def _sweep_job(job: tuple[RunConfig, str, int]) -> tuple[str, int, list[ResultRow]]:
    base, method, seed = job
    config = dataclasses.replace(base, method=method, seed=seed)
    return method, seed, run_expanding(config)


def run_sweep(
    base: RunConfig,
    methods: Sequence[str],
    seeds: Sequence[int],
    workers: int = 1,
) -> list[tuple[str, int, ResultRow]]:
    """Fan (method, seed) jobs across worker processes; each job is itself
    single-threaded. Rows come back merged in deterministic
    (method, seed, experiment) order regardless of completion order."""
    jobs = [(base, m, s) for m in methods for s in seeds]
    if workers <= 1:
        finished = [_sweep_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finished = list(pool.map(_sweep_job, jobs))
    merged = [
        (method, seed, row) for method, seed, rows in finished for row in rows
    ]
    merged.sort(key=lambda t: (t[0], t[1], t[2].experiment_index))
    return merged


def summarize(rows: list[ResultRow]) -> dict:
    if not rows:
        return {"final_test_acc": None, "mean_test_acc": None, "final_steps": None, "mean_steps": None}
    return {
        "final_test_acc": rows[-1].test_accuracy,
        "mean_test_acc": sum(r.test_accuracy for r in rows) / len(rows),
        "final_steps": rows[-1].steps_to_converge,
        "mean_steps": sum(r.steps_to_converge for r in rows) / len(rows),
    }


def emit_results(
    rows: list[ResultRow],
    config: RunConfig,
    out_dir: str,
    labeled_rows: Optional[list[tuple[str, int, ResultRow]]] = None,
) -> dict:
    """Write results.csv and manifest.json; returns the written paths.

    Single-job emission labels every row with the config's method and seed;
    sweep emission passes pre-labeled rows instead.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    manifest_path = os.path.join(out_dir, "manifest.json")
    if labeled_rows is None:
        labeled_rows = [(config.method, config.seed, row) for row in rows]
    try:
        with open(csv_path, "w") as fh:
            fh.write(RESULTS_CSV_HEADER + "\n")
            for method, seed, row in labeled_rows:
                fh.write(row.csv_row(method, seed) + "\n")
        canonical = json.dumps(config.raw, sort_keys=True)
        manifest = {
            "config": config.raw,
            "method": config.method,
            "seed": config.seed,
            "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
            "versions": {
                "plasticity_lab": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "summary": summarize([r for _, _, r in labeled_rows]),
        }
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing results under {out_dir}: {exc}") from exc
    return {"csv": csv_path, "manifest": manifest_path}
