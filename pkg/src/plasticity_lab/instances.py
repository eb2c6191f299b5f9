"""Instance generation and assumption checking.

Fixed-count specs realize the extreme-stationarity setting (every chunk holds
the same combo multiset, fresh point identities); Bernoulli specs realize the
synthetic sampled setting. The assumption checker certifies the two structural
conditions the restart theorems rely on: distinct unclassified-portion values
within a class, and the per-class learnable/unlearnable feature pattern.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .framework import (
    Chunk,
    DataPoint,
    FeatureCombo,
    FeatureId,
    FrameworkConfig,
)
from .strategies import ExperimentSchedule

EXHAUSTIVE_SIZE_CAP = 16  # max C*K for full subset enumeration


@dataclass
class FixedCountSpec:
    """Per-class map from combo to its exact per-chunk multiplicity."""

    per_class: dict[int, dict[FeatureCombo, int]]

    def __post_init__(self) -> None:
        if not self.per_class or all(not m for m in self.per_class.values()):
            raise ValueError("spec must contain at least one combo")
        for c, combos in self.per_class.items():
            for a, n_a in combos.items():
                if n_a < 1:
                    raise ValueError("combo multiplicities must be >= 1")
                if a.class_index is not None and a.class_index != c:
                    raise ValueError(f"combo of class {a.class_index} listed under {c}")

    @property
    def chunk_size(self) -> int:
        return sum(n for m in self.per_class.values() for n in m.values())

    def population(self) -> dict[FeatureCombo, int]:
        """Flat combo -> multiplicity map (the test distribution weights)."""
        out: dict[FeatureCombo, int] = {}
        for combos in self.per_class.values():
            for a, n_a in combos.items():
                out[a] = out.get(a, 0) + n_a
        return out

    def chunk_feature_counts(self, c: int, features_per_class: int) -> list[int]:
        """Occurrences of each class-c feature within a single chunk."""
        counts = [0] * features_per_class
        for a, n_a in self.per_class.get(c, {}).items():
            for v in a:
                counts[v.feature_index] += n_a
        return counts


@dataclass
class BernoulliSpec:
    """Per-feature inclusion probabilities (shared across classes unless a
    per-class override is given), uniform class prior, fixed chunk size."""

    probs: list[float]
    chunk_size: int
    num_classes: int = 2
    class_probs: Optional[dict[int, list[float]]] = None

    def __post_init__(self) -> None:
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")

    def probs_for(self, c: int) -> list[float]:
        if self.class_probs and c in self.class_probs:
            return self.class_probs[c]
        return self.probs


@dataclass
class AssumptionReport:
    satisfied: bool
    violation_witness: Optional[dict] = None

    def __post_init__(self) -> None:
        if self.satisfied == (self.violation_witness is not None):
            raise ValueError("witness must be present iff not satisfied")


def gen_fixed_instance(
    spec: FixedCountSpec, num_experiments: int, rng, start_id: int = 0
) -> ExperimentSchedule:
    """Materialize J identical-histogram chunks with globally fresh point ids.

    The rng only shuffles point order within a chunk; the combo multiset of
    every chunk equals the spec exactly.
    """
    if num_experiments < 1:
        raise ValueError("need at least one experiment")
    ids = itertools.count(start_id)
    chunks = []
    for _ in range(num_experiments):
        points = [
            DataPoint(next(ids), c, a)
            for c, combos in sorted(spec.per_class.items())
            for a, n_a in sorted(combos.items(), key=lambda kv: sorted(kv[0].features))
            for _ in range(n_a)
        ]
        rng.shuffle(points)
        chunks.append(Chunk(points))
    return ExperimentSchedule(chunks)


def sample_bernoulli_combo(spec: BernoulliSpec, label: int, rng) -> FeatureCombo:
    probs = spec.probs_for(label)
    return FeatureCombo(
        frozenset(
            FeatureId(label, k) for k, p in enumerate(probs) if rng.random() < p
        )
    )


def gen_bernoulli_instance(
    spec: BernoulliSpec, num_experiments: int, rng, start_id: int = 0
) -> ExperimentSchedule:
    """J chunks of fresh points: uniform label, independent feature inclusion."""
    if num_experiments < 1:
        raise ValueError("need at least one experiment")
    ids = itertools.count(start_id)
    chunks = []
    for _ in range(num_experiments):
        points = []
        for _ in range(spec.chunk_size):
            label = rng.randrange(spec.num_classes)
            points.append(DataPoint(next(ids), label, sample_bernoulli_combo(spec, label, rng)))
        chunks.append(Chunk(points))
    return ExperimentSchedule(chunks)


def portion_unclassified(
    v: FeatureId,
    learned: set[FeatureId] | frozenset[FeatureId],
    spec: FixedCountSpec,
    cfg: FrameworkConfig,
) -> Fraction:
    """Exact fraction of a chunk containing v and not well-classified by
    `learned`."""
    if v.class_index not in spec.per_class:
        raise ValueError(f"class {v.class_index} absent from spec")
    tau = cfg.classify_threshold
    num = sum(
        n_a
        for a, n_a in spec.per_class[v.class_index].items()
        if v in a and len(a.features & learned) < tau
    )
    return Fraction(num, spec.chunk_size)


def compute_delta(
    spec: FixedCountSpec,
    g_set: set[FeatureId] | frozenset[FeatureId],
    cfg: FrameworkConfig,
) -> Fraction:
    """Largest unclassified portion over features outside g_set."""
    remaining = [v for v in cfg.all_features() if v not in g_set]
    if not remaining:
        raise ValueError("g_set covers every feature")
    return max(
        portion_unclassified(v, g_set, spec, cfg)
        for v in remaining
        if v.class_index in spec.per_class
    )


def _feature_bit(v: FeatureId, cfg: FrameworkConfig) -> int:
    return v.class_index * cfg.features_per_class + v.feature_index


def _combo_mask(a: FeatureCombo, cfg: FrameworkConfig) -> int:
    m = 0
    for v in a:
        m |= 1 << _feature_bit(v, cfg)
    return m


def _check_existence_clause(
    spec: FixedCountSpec, cfg: FrameworkConfig
) -> Optional[dict]:
    """Per class: at least tau-1 learnable features (single-chunk count at or
    above the learn threshold) and at least one unlearnable one."""
    for c in range(cfg.num_classes):
        counts = spec.chunk_feature_counts(c, cfg.features_per_class)
        learnable = sum(1 for x in counts if x >= cfg.learn_threshold)
        unlearnable = sum(1 for x in counts if x < cfg.learn_threshold)
        if learnable < cfg.classify_threshold - 1:
            return {"kind": "missing-learnable", "class_index": c, "counts": counts}
        if unlearnable < 1:
            return {"kind": "missing-unlearnable", "class_index": c, "counts": counts}
    return None


def _distinctness_violation_at(
    spec: FixedCountSpec,
    cfg: FrameworkConfig,
    learned: set[FeatureId] | frozenset[FeatureId],
) -> Optional[dict]:
    """Two distinct unlearned same-class features with equal nonzero
    unclassified portion at this learned set, if any.

    Zero-portion ties are permitted: such features are unlearnable from this
    state, so they can never be selected and ties among them are harmless.
    """
    for c in range(cfg.num_classes):
        seen: dict[Fraction, FeatureId] = {}
        for k in range(cfg.features_per_class):
            v = FeatureId(c, k)
            if v in learned or c not in spec.per_class:
                continue
            h = portion_unclassified(v, learned, spec, cfg)
            if h == 0:
                continue
            if h in seen:
                return {
                    "kind": "duplicate-portion",
                    "class_index": c,
                    "v1": seen[h],
                    "v2": v,
                    "learned": sorted(learned),
                    "portion": h,
                }
            seen[h] = v
    return None


def _exhaustive_distinctness_violation(
    spec: FixedCountSpec, cfg: FrameworkConfig
) -> Optional[dict]:
    """Vectorized scan of all learned subsets for a duplicate-portion pair."""
    nbits = cfg.num_classes * cfg.features_per_class
    combos = [
        (_combo_mask(a, cfg), n_a)
        for m in spec.per_class.values()
        for a, n_a in m.items()
    ]
    tau = cfg.classify_threshold
    n_subsets = 1 << nbits
    all_l = np.arange(n_subsets, dtype=np.uint32)
    pc = np.zeros(n_subsets, dtype=np.uint8)
    for b in range(nbits):
        pc += ((all_l >> b) & 1).astype(np.uint8)
    # h[L, v] = chunk points containing v in combos not well-classified by L
    h = np.zeros((n_subsets, nbits), dtype=np.int32)
    for mask, n_a in combos:
        hit = n_a * (pc[all_l & np.uint32(mask)] < tau).astype(np.int32)
        for b in range(nbits):
            if mask >> b & 1:
                h[:, b] += hit
    for c in range(cfg.num_classes):
        cols = [c * cfg.features_per_class + k for k in range(cfg.features_per_class)]
        vals = h[:, cols].astype(np.int64)
        for i, b in enumerate(cols):
            in_l = (all_l >> np.uint32(b) & 1).astype(bool)
            # unique sentinels knock excluded entries out of duplicate search
            vals[in_l | (vals[:, i] == 0), i] = -(i + 1)
        vals.sort(axis=1)
        dup = (vals[:, 1:] == vals[:, :-1]) & (vals[:, 1:] > 0)
        rows = np.nonzero(dup.any(axis=1))[0]
        if rows.size:
            learned_mask = int(all_l[rows[0]])
            learned = {
                FeatureId(b // cfg.features_per_class, b % cfg.features_per_class)
                for b in range(nbits)
                if learned_mask >> b & 1
            }
            return _distinctness_violation_at(spec, cfg, learned)
    return None


def check_assumption2(
    spec: FixedCountSpec,
    cfg: FrameworkConfig,
    mode: str = "exhaustive",
    visited: Optional[Iterable[frozenset[FeatureId]]] = None,
) -> AssumptionReport:
    """Certify the structural assumption behind the restart theorems.

    exhaustive mode enumerates every learned subset (capped at 16 total
    features); visited mode checks distinctness only at the supplied
    learned-set snapshots. The existence clause is checked in both modes.
    """
    witness = _check_existence_clause(spec, cfg)
    if witness is None:
        if mode == "exhaustive":
            if cfg.num_classes * cfg.features_per_class > EXHAUSTIVE_SIZE_CAP:
                raise ValueError(
                    f"exhaustive check limited to {EXHAUSTIVE_SIZE_CAP} total features"
                )
            witness = _exhaustive_distinctness_violation(spec, cfg)
        elif mode == "visited":
            for learned in visited or ():
                witness = _distinctness_violation_at(spec, cfg, learned)
                if witness is not None:
                    break
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return AssumptionReport(satisfied=witness is None, violation_witness=witness)


def random_fixed_spec(
    rng,
    cfg: FrameworkConfig,
    max_chunk_size: int,
    extra_combo_prob: float = 0.3,
) -> Optional[FixedCountSpec]:
    """Draw a candidate fixed-count spec (not yet assumption-checked).

    Each class gets a nested chain of combos over a random feature order,
    sometimes with an extra non-nested combo thrown in; multiplicities are
    random. Returns None when the draw exceeds the chunk-size budget.
    """
    k = cfg.features_per_class
    tau = cfg.classify_threshold
    per_class: dict[int, dict[FeatureCombo, int]] = {}
    budget = max_chunk_size
    for c in range(cfg.num_classes):
        order = list(range(k))
        rng.shuffle(order)
        n_combos = rng.randint(max(2, tau), k)
        sizes = sorted(rng.sample(range(1, k + 1), n_combos))
        combos: dict[FeatureCombo, int] = {}
        for size in sizes:
            a = FeatureCombo(frozenset(FeatureId(c, order[i]) for i in range(size)))
            combos[a] = rng.randint(1, 4)
        if rng.random() < extra_combo_prob:
            size = rng.randint(1, k)
            a = FeatureCombo(frozenset(FeatureId(c, i) for i in rng.sample(range(k), size)))
            combos[a] = combos.get(a, 0) + rng.randint(1, 3)
        per_class[c] = combos
        budget -= sum(combos.values())
        if budget < 0:
            return None
    return FixedCountSpec(per_class)


def _quick_distinctness_reject(
    spec: FixedCountSpec, cfg: FrameworkConfig, rng, samples: int = 24
) -> bool:
    """Cheap screen before the exhaustive scan: check the empty learned set
    and a few random ones. A duplicate found here is definitive; a clean
    result still needs the exhaustive pass."""
    if _distinctness_violation_at(spec, cfg, frozenset()) is not None:
        return True
    features = cfg.all_features()
    for _ in range(samples):
        learned = {v for v in features if rng.random() < 0.5}
        if _distinctness_violation_at(spec, cfg, learned) is not None:
            return True
    return False


def sample_satisfying_spec(
    rng,
    cfg: FrameworkConfig,
    max_chunk_size: int,
    max_tries: int = 10_000,
) -> FixedCountSpec:
    """Rejection-sample a spec passing the assumption check (exhaustive when
    the instance is small enough, existence-only otherwise; callers running
    experiments should additionally apply the visited-mode check)."""
    small = cfg.num_classes * cfg.features_per_class <= EXHAUSTIVE_SIZE_CAP
    for _ in range(max_tries):
        spec = random_fixed_spec(rng, cfg, max_chunk_size)
        if spec is None or spec.chunk_size > max_chunk_size:
            continue
        if _check_existence_clause(spec, cfg) is not None:
            continue
        if small and _quick_distinctness_reject(spec, cfg, rng):
            continue
        mode = "exhaustive" if small else "visited"
        if check_assumption2(spec, cfg, mode=mode, visited=()).satisfied:
            return spec
    raise RuntimeError("could not sample an assumption-satisfying spec")


def full_support_spec(rng, cfg: FrameworkConfig, max_count: int = 2) -> FixedCountSpec:
    """Spec where every non-empty combo of every class appears; this support
    makes the strict accuracy-monotonicity property hold for every valid
    superset pair."""
    k = cfg.features_per_class
    per_class: dict[int, dict[FeatureCombo, int]] = {}
    for c in range(cfg.num_classes):
        combos: dict[FeatureCombo, int] = {}
        for size in range(1, k + 1):
            for subset in itertools.combinations(range(k), size):
                a = FeatureCombo(frozenset(FeatureId(c, i) for i in subset))
                combos[a] = rng.randint(1, max_count)
        per_class[c] = combos
    return FixedCountSpec(per_class)


def schedule_to_json(schedule: ExperimentSchedule) -> str:
    """Serialize a materialized schedule for exact replay."""
    chunks = [
        [
            {
                "point_id": p.point_id,
                "label": p.label,
                "features": sorted((v.class_index, v.feature_index) for v in p.combo),
            }
            for p in chunk.points
        ]
        for chunk in schedule.chunks
    ]
    return json.dumps({"chunks": chunks})


def schedule_from_json(text: str) -> ExperimentSchedule:
    doc = json.loads(text)
    chunks = []
    for chunk in doc["chunks"]:
        points = [
            DataPoint(
                p["point_id"],
                p["label"],
                FeatureCombo(frozenset(FeatureId(c, k) for c, k in p["features"])),
            )
            for p in chunk
        ]
        chunks.append(Chunk(points))
    return ExperimentSchedule(chunks)


def fixed_spec_from_toml(doc: dict) -> tuple[FrameworkConfig, FixedCountSpec]:
    """Build a config and fixed-count spec from a parsed TOML document with a
    [framework] table and [[combo]] entries."""
    fw = doc["framework"]
    cfg = FrameworkConfig(
        num_classes=fw["num_classes"],
        features_per_class=fw["features_per_class"],
        classify_threshold=fw["classify_threshold"],
        learn_threshold=fw["learn_threshold"],
    )
    per_class: dict[int, dict[FeatureCombo, int]] = {}
    for entry in doc.get("combo", []):
        c = entry["class_index"]
        a = FeatureCombo(frozenset(FeatureId(c, k) for k in entry["features"]))
        per_class.setdefault(c, {})[a] = entry["count"]
    return cfg, FixedCountSpec(per_class)
