"""Cold / warm / ideal restart strategies over an expanding dataset, plus the
exact and Monte-Carlo test-accuracy metrics and the training-time proxy."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

from .framework import (
    Chunk,
    DataPoint,
    FeatureCombo,
    FeatureId,
    FrameworkConfig,
    TrainState,
    nonzero_gradient_set,
    training_process,
)

STRATEGIES = ("cold", "warm", "ideal")

CSV_HEADER = "strategy,seed,experiment,active_at_start,learned_count,memorized_count,test_acc"


@dataclass
class ExperimentSchedule:
    """The chunk sequence; experiment j trains on the union of chunks 1..j."""

    chunks: list[Chunk]

    def __post_init__(self) -> None:
        if not self.chunks:
            raise ValueError("schedule must contain at least one chunk")

    @property
    def num_experiments(self) -> int:
        return len(self.chunks)

    def cumulative(self, j: int) -> list[DataPoint]:
        """All points of the first j chunks."""
        out: list[DataPoint] = []
        for chunk in self.chunks[:j]:
            out.extend(chunk.points)
        return out


@dataclass
class RunRecord:
    experiment_index: int
    active_at_start: int
    learned_count: int
    learned_set: frozenset[FeatureId]
    memorized_count: int
    test_accuracy: Optional[Union[Fraction, float]] = None

    def csv_row(self, strategy: str, seed: int) -> str:
        acc = "" if self.test_accuracy is None else format_accuracy(self.test_accuracy)
        return (
            f"{strategy},{seed},{self.experiment_index},{self.active_at_start},"
            f"{self.learned_count},{self.memorized_count},{acc}"
        )


def format_accuracy(acc: Union[Fraction, float]) -> str:
    if isinstance(acc, Fraction):
        return f"{acc.numerator}/{acc.denominator}"
    return repr(acc)


def run_strategy(
    kind: str,
    schedule: ExperimentSchedule,
    cfg: FrameworkConfig,
    accuracy_fn: Optional[Callable[[frozenset[FeatureId]], Union[Fraction, float]]] = None,
    priority: Optional[dict[FeatureId, int]] = None,
    return_states: bool = False,
):
    """Run all experiments of the schedule under one restart strategy.

    cold resets everything per experiment, warm carries both the learned set
    and the memorized set, ideal carries the learned set but forgets the
    memorized set (its trace keeps only the learn events so that replaying it
    still reproduces the carried state). With return_states the per-experiment
    final TrainState values are returned alongside the records.
    """
    if kind not in STRATEGIES:
        raise ValueError(f"unknown strategy {kind!r}")
    records: list[RunRecord] = []
    states: list[TrainState] = []
    cumulative: list[DataPoint] = []
    state = TrainState()
    for j, chunk in enumerate(schedule.chunks, start=1):
        cumulative.extend(chunk.points)
        if kind == "cold":
            state = TrainState()
        elif kind == "ideal":
            state = TrainState(
                learned=set(state.learned),
                trace=[ev for ev in state.trace if ev.event == "learn"],
            )
        active0 = nonzero_gradient_set(
            state.learned, state.memorized, cumulative, cfg.classify_threshold
        )
        state = training_process(state, cumulative, cfg, priority)
        learned = frozenset(state.learned)
        records.append(
            RunRecord(
                experiment_index=j,
                active_at_start=len(active0),
                learned_count=len(learned),
                learned_set=learned,
                memorized_count=len(state.memorized),
                test_accuracy=None if accuracy_fn is None else accuracy_fn(learned),
            )
        )
        if return_states:
            states.append(state.copy())
    if return_states:
        return records, states
    return records


def accuracy_exact(
    learned: frozenset[FeatureId] | set[FeatureId],
    population: Mapping[FeatureCombo, int],
    cfg: FrameworkConfig,
) -> Fraction:
    """Exact expected test accuracy over a fixed-count combo population.

    A combo is answered correctly when it shares at least the classify
    threshold with the learned set; otherwise the model guesses uniformly,
    contributing 1/C in expectation.
    """
    n = sum(population.values())
    if n <= 0:
        raise ValueError("population must contain at least one point")
    tau = cfg.classify_threshold
    miss = sum(
        n_a
        for combo_, n_a in population.items()
        if len(combo_.features & learned) < tau
    )
    c = cfg.num_classes
    return 1 - Fraction(c - 1, c) * Fraction(miss, n)


def accuracy_on_combos(
    learned: frozenset[FeatureId] | set[FeatureId],
    combos: Sequence[FeatureCombo],
    cfg: FrameworkConfig,
) -> float:
    """Mean expected accuracy over a sampled list of test combos."""
    if not combos:
        raise ValueError("no test combos")
    tau = cfg.classify_threshold
    guess = 1.0 / cfg.num_classes
    total = 0.0
    for a in combos:
        total += 1.0 if len(a.features & learned) >= tau else guess
    return total / len(combos)


def accuracy_monte_carlo(
    learned: frozenset[FeatureId] | set[FeatureId],
    sampler: Callable[[object], FeatureCombo],
    test_size: int,
    rng,
    cfg: FrameworkConfig,
) -> float:
    """Monte-Carlo accuracy: draw test combos and score them in expectation
    (an unclassified point contributes 1/C rather than a sampled guess)."""
    if test_size < 1:
        raise ValueError("test_size must be >= 1")
    combos = [sampler(rng) for _ in range(test_size)]
    return accuracy_on_combos(learned, combos, cfg)


def training_time(records: Sequence[RunRecord]) -> int:
    """Sum over experiments of the active-set size at experiment start."""
    return sum(r.active_at_start for r in records)
