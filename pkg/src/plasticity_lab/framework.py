"""Discrete feature-learning core: sequential frequency-based learning with
noise memorization.

Everything in this module is exact integer/set arithmetic. A "feature" is a
class-indexed symbol shared across many points; "noise" is reduced to each
point's unique identity, since the only thing the dynamics need from noise is
that it never repeats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence


class FeatureId(NamedTuple):
    """Class-indexed feature symbol; orders lexicographically (class, index)."""

    class_index: int
    feature_index: int


@dataclass(frozen=True)
class FeatureCombo:
    """The feature set attached to one data point (all from a single class)."""

    features: frozenset[FeatureId]

    def __post_init__(self) -> None:
        classes = {v.class_index for v in self.features}
        if len(classes) > 1:
            raise ValueError(f"combo mixes classes {sorted(classes)}")

    @property
    def class_index(self) -> Optional[int]:
        for v in self.features:
            return v.class_index
        return None

    def __contains__(self, v: FeatureId) -> bool:
        return v in self.features

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)


def combo(class_index: int, feature_indexes: Iterable[int]) -> FeatureCombo:
    """Convenience constructor from bare feature indexes of one class."""
    return FeatureCombo(frozenset(FeatureId(class_index, k) for k in feature_indexes))


@dataclass(frozen=True)
class DataPoint:
    point_id: int
    label: int
    combo: FeatureCombo

    def __post_init__(self) -> None:
        cls = self.combo.class_index
        if cls is not None and cls != self.label:
            raise ValueError(f"combo class {cls} != label {self.label}")


@dataclass
class Chunk:
    points: list[DataPoint]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("chunk must be non-empty")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class FrameworkConfig:
    """Problem dimensions and the two thresholds driving the dynamics.

    learn_threshold: minimum active count for a feature to beat the noise.
    classify_threshold: learned features a point needs to be well-classified.
    """

    num_classes: int
    features_per_class: int
    classify_threshold: int
    learn_threshold: int

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.features_per_class < 2:
            raise ValueError("need at least 2 features per class")
        if not 1 <= self.classify_threshold < self.features_per_class:
            raise ValueError("classify_threshold must be in [1, features_per_class)")
        if self.learn_threshold < 1:
            raise ValueError("learn_threshold must be positive")

    def all_features(self) -> list[FeatureId]:
        return [
            FeatureId(c, k)
            for c in range(self.num_classes)
            for k in range(self.features_per_class)
        ]


@dataclass(frozen=True)
class TraceEvent:
    step: int
    event: str  # "learn" | "memorize"
    feature: Optional[FeatureId] = None
    point_ids: Optional[tuple[int, ...]] = None

    def to_json(self) -> str:
        if self.event == "learn":
            payload = {"step": self.step, "event": "learn", "feature": list(self.feature)}
        else:
            payload = {"step": self.step, "event": "memorize", "points": list(self.point_ids)}
        return json.dumps(payload)


@dataclass
class TrainState:
    learned: set[FeatureId] = field(default_factory=set)
    memorized: set[int] = field(default_factory=set)
    trace: list[TraceEvent] = field(default_factory=list)

    def copy(self) -> "TrainState":
        return TrainState(set(self.learned), set(self.memorized), list(self.trace))


def replay_trace(trace: Sequence[TraceEvent]) -> tuple[set[FeatureId], set[int]]:
    """Rebuild (learned, memorized) from a trace; used by certificate checks."""
    learned: set[FeatureId] = set()
    memorized: set[int] = set()
    for ev in trace:
        if ev.event == "learn":
            learned.add(ev.feature)
        else:
            memorized.update(ev.point_ids)
    return learned, memorized


def feature_count(v: FeatureId, active: Iterable[DataPoint]) -> int:
    """Number of active points whose combo contains v (the integer frequency)."""
    return sum(1 for p in active if v in p.combo)


def nonzero_gradient_set(
    learned: set[FeatureId],
    memorized: set[int],
    data: Iterable[DataPoint],
    classify_threshold: int,
) -> set[DataPoint]:
    """Points that are neither well-classified by `learned` nor memorized."""
    return {
        p
        for p in data
        if p.point_id not in memorized
        and len(p.combo.features & learned) < classify_threshold
    }


def select_feature(
    candidates: Iterable[FeatureId],
    counts: dict[FeatureId, int],
    priority: Optional[dict[FeatureId, int]] = None,
) -> Optional[FeatureId]:
    """Candidate with maximal count; ties broken by `priority` rank
    (lexicographic when priority is None). None if no candidates."""
    best: Optional[FeatureId] = None
    best_count = -1
    for v in candidates:
        c = counts.get(v, 0)
        if c > best_count:
            best, best_count = v, c
        elif c == best_count:
            if priority is None:
                if v < best:
                    best = v
            elif priority[v] < priority[best]:
                best = v
    return best


def training_process(
    state: TrainState,
    data: Iterable[DataPoint],
    cfg: FrameworkConfig,
    priority: Optional[dict[FeatureId, int]] = None,
) -> TrainState:
    """Run one experiment's training to completion and return the new state.

    Repeatedly selects the most frequent unlearned feature over the active
    set; learns it if its count reaches the learn threshold, otherwise
    memorizes every remaining active point and stops. Pure: the input state
    is not mutated. `priority` overrides the tie-break order (used by the
    learning-order lemma harness).

    Counts are maintained incrementally: each point tracks how many of its
    features are learned, and an inverted feature->points index lets a learn
    step touch only the points containing the new feature.
    """
    learned = set(state.learned)
    memorized = set(state.memorized)
    trace = list(state.trace)
    tau = cfg.classify_threshold

    active: dict[int, DataPoint] = {}
    overlap: dict[int, int] = {}
    counts: dict[FeatureId, int] = {}
    index: dict[FeatureId, list[int]] = {}
    for p in data:
        if p.point_id in memorized:
            continue
        ov = len(p.combo.features & learned)
        if ov >= tau:
            continue
        pid = p.point_id
        active[pid] = p
        overlap[pid] = ov
        for v in p.combo:
            counts[v] = counts.get(v, 0) + 1
            if v not in learned:
                index.setdefault(v, []).append(pid)

    candidates = set(cfg.all_features()) - learned
    step = len(trace)
    while active:
        step += 1
        v = select_feature(candidates, counts, priority)
        if v is not None and counts.get(v, 0) >= cfg.learn_threshold:
            learned.add(v)
            candidates.discard(v)
            trace.append(TraceEvent(step, "learn", feature=v))
            for pid in index.get(v, ()):
                if pid not in active:
                    continue
                overlap[pid] += 1
                if overlap[pid] >= tau:
                    point = active.pop(pid)
                    for u in point.combo:
                        counts[u] -= 1
        else:
            remaining = tuple(sorted(active))
            memorized.update(remaining)
            trace.append(TraceEvent(step, "memorize", point_ids=remaining))
            active.clear()
    return TrainState(learned, memorized, trace)
