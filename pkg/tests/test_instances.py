"""Instance generation, the unclassified-portion function, and the structural
assumption checker, cross-checked against naive enumeration."""

import json
import random
from collections import Counter
from fractions import Fraction

import pytest

from plasticity_lab.framework import FeatureId, FrameworkConfig, combo
from plasticity_lab.instances import (
    BernoulliSpec,
    FixedCountSpec,
    check_assumption2,
    compute_delta,
    fixed_spec_from_toml,
    full_support_spec,
    gen_bernoulli_instance,
    gen_fixed_instance,
    portion_unclassified,
    random_fixed_spec,
    sample_satisfying_spec,
    schedule_from_json,
    schedule_to_json,
)

from oracles import naive_check_assumption2, naive_portion


def histogram(chunk):
    return Counter((p.label, p.combo.features) for p in chunk.points)


class TestGenFixedInstance:
    def test_chunks_replicate_spec_histogram(self):
        spec = FixedCountSpec(
            {
                0: {combo(0, [0, 1]): 2, combo(0, [0]): 1},
                1: {combo(1, [1]): 3},
            }
        )
        schedule = gen_fixed_instance(spec, 3, random.Random(0))
        assert schedule.num_experiments == 3
        expected = Counter()
        for c, combos in spec.per_class.items():
            for a, n_a in combos.items():
                expected[(c, a.features)] += n_a
        for chunk in schedule.chunks:
            assert len(chunk) == spec.chunk_size
            assert histogram(chunk) == expected

    def test_point_ids_globally_unique(self):
        spec = FixedCountSpec({0: {combo(0, [0, 1]): 2}, 1: {combo(1, [0]): 1}})
        schedule = gen_fixed_instance(spec, 4, random.Random(1))
        ids = [p.point_id for c in schedule.chunks for p in c.points]
        assert len(ids) == len(set(ids)) == 12

    def test_empty_spec_rejected(self):
        with pytest.raises(ValueError):
            FixedCountSpec({})

    def test_zero_multiplicity_rejected(self):
        with pytest.raises(ValueError):
            FixedCountSpec({0: {combo(0, [0]): 0}})

    def test_single_experiment_is_exactly_the_spec(self):
        spec = FixedCountSpec({0: {combo(0, [0]): 2}, 1: {combo(1, [1]): 1}})
        schedule = gen_fixed_instance(spec, 1, random.Random(2))
        assert len(schedule.chunks) == 1
        assert len(schedule.chunks[0]) == 3


class TestGenBernoulliInstance:
    def test_prob_zero_gives_empty_combos(self):
        spec = BernoulliSpec(probs=[0.0, 0.0], chunk_size=20)
        schedule = gen_bernoulli_instance(spec, 2, random.Random(0))
        assert all(len(p.combo) == 0 for c in schedule.chunks for p in c.points)

    def test_prob_one_gives_full_combos(self):
        spec = BernoulliSpec(probs=[1.0, 1.0, 1.0], chunk_size=20)
        schedule = gen_bernoulli_instance(spec, 1, random.Random(0))
        for p in schedule.chunks[0].points:
            assert p.combo.features == {FeatureId(p.label, k) for k in range(3)}

    def test_deterministic_under_seed(self):
        spec = BernoulliSpec(probs=[0.3, 0.7], chunk_size=30)
        a = gen_bernoulli_instance(spec, 3, random.Random(5))
        b = gen_bernoulli_instance(spec, 3, random.Random(5))
        assert a == b
        c = gen_bernoulli_instance(spec, 3, random.Random(6))
        assert a != c

    def test_inclusion_rates_within_four_sigma(self):
        rng = random.Random(11)
        probs = [rng.uniform(0.0, 0.2) for _ in range(50)]
        spec = BernoulliSpec(probs=probs, chunk_size=1000)
        schedule = gen_bernoulli_instance(spec, 5, rng)
        points = [p for c in schedule.chunks for p in c.points]
        for k, p_k in enumerate(probs):
            hits = sum(1 for pt in points if FeatureId(pt.label, k) in pt.combo)
            n = len(points)
            se = max((p_k * (1 - p_k) / n) ** 0.5, 1e-9)
            assert abs(hits / n - p_k) <= 4 * se + 1e-12


CFG23 = FrameworkConfig(2, 3, 2, 2)


class TestPortionUnclassified:
    def test_nothing_learned_is_containment_fraction(self):
        spec = FixedCountSpec(
            {0: {combo(0, [0, 1]): 2, combo(0, [0]): 1}, 1: {combo(1, [2]): 1}}
        )
        v = FeatureId(0, 0)
        assert portion_unclassified(v, set(), spec, CFG23) == Fraction(3, 4)

    def test_absent_feature_is_zero(self):
        spec = FixedCountSpec({0: {combo(0, [0]): 2}, 1: {combo(1, [0]): 1}})
        assert portion_unclassified(FeatureId(0, 2), set(), spec, CFG23) == 0

    def test_hand_enumeration_case(self):
        # combos A={v,u}:2 and B={v,w,z}:1 with learned={u,w}, tau=2:
        # both stay below the threshold, so every point containing v counts
        cfg = FrameworkConfig(2, 4, 2, 2)
        spec = FixedCountSpec(
            {
                0: {combo(0, [0, 1]): 2, combo(0, [0, 2, 3]): 1},
                1: {combo(1, [0]): 1},
            }
        )
        learned = {FeatureId(0, 1), FeatureId(0, 2)}
        v = FeatureId(0, 0)
        assert portion_unclassified(v, learned, spec, cfg) == Fraction(3, 4)

    def test_matches_naive_and_monotone(self):
        rng = random.Random(3)
        cfg = FrameworkConfig(2, 4, 2, 2)
        for _ in range(30):
            spec = None
            while spec is None:
                spec = random_fixed_spec(rng, cfg, 20)
            feats = cfg.all_features()
            learned = set(rng.sample(feats, rng.randint(0, 4)))
            for v in feats:
                if v.class_index not in spec.per_class:
                    continue
                h = portion_unclassified(v, learned, spec, cfg)
                assert h == naive_portion(v, learned, spec, cfg)
                grown = learned | set(rng.sample(feats, 2))
                assert portion_unclassified(v, grown, spec, cfg) <= h

    def test_unknown_class_rejected(self):
        spec = FixedCountSpec({0: {combo(0, [0]): 1}, 1: {combo(1, [0]): 1}})
        with pytest.raises(ValueError):
            portion_unclassified(FeatureId(5, 0), set(), spec, CFG23)


class TestComputeDelta:
    def test_empty_g_is_max_containment(self):
        spec = FixedCountSpec(
            {0: {combo(0, [0, 1]): 3, combo(0, [0]): 1}, 1: {combo(1, [0]): 4}}
        )
        assert compute_delta(spec, set(), CFG23) == Fraction(4, 8)

    def test_full_g_rejected(self):
        spec = FixedCountSpec({0: {combo(0, [0]): 1}, 1: {combo(1, [0]): 1}})
        with pytest.raises(ValueError):
            compute_delta(spec, set(CFG23.all_features()), CFG23)


class TestCheckAssumption2:
    def nested_good_spec(self):
        # strictly nested supports per class plus one rare feature
        return FixedCountSpec(
            {
                0: {combo(0, [0]): 4, combo(0, [0, 1]): 2, combo(0, [0, 1, 2]): 1},
                1: {combo(1, [0]): 4, combo(1, [0, 1]): 2, combo(1, [0, 1, 2]): 1},
            }
        )

    def test_nested_spec_satisfies(self):
        report = check_assumption2(self.nested_good_spec(), CFG23, mode="exhaustive")
        assert report.satisfied and report.violation_witness is None

    def test_identical_supports_violate(self):
        spec = FixedCountSpec(
            {
                0: {combo(0, [0, 1]): 3, combo(0, [0, 1, 2]): 1},
                1: {combo(1, [0]): 4, combo(1, [0, 1]): 2, combo(1, [0, 1, 2]): 1},
            }
        )
        report = check_assumption2(spec, CFG23, mode="exhaustive")
        assert not report.satisfied
        assert report.violation_witness["kind"] == "duplicate-portion"

    def test_all_features_learnable_violates_existence(self):
        spec = FixedCountSpec(
            {
                0: {combo(0, [0]): 4, combo(0, [0, 1]): 3, combo(0, [0, 1, 2]): 2},
                1: {combo(1, [0]): 4, combo(1, [0, 1]): 2, combo(1, [0, 1, 2]): 1},
            }
        )
        report = check_assumption2(spec, CFG23, mode="exhaustive")
        assert not report.satisfied
        assert report.violation_witness["kind"] == "missing-unlearnable"

    def test_missing_learnable_violates_existence(self):
        cfg = FrameworkConfig(2, 4, 3, 5)
        spec = self.nested_good_spec()
        report = check_assumption2(spec, cfg, mode="exhaustive")
        assert not report.satisfied
        assert report.violation_witness["kind"] == "missing-learnable"

    def test_size_cap_enforced(self):
        cfg = FrameworkConfig(3, 6, 2, 2)
        spec = FixedCountSpec(
            {c: {combo(c, [0]): 2, combo(c, [1]): 1} for c in range(3)}
        )
        with pytest.raises(ValueError):
            check_assumption2(spec, cfg, mode="exhaustive")

    def test_exhaustive_agrees_with_naive_enumeration(self):
        rng = random.Random(21)
        cfg = FrameworkConfig(2, 4, 2, 2)
        checked = 0
        while checked < 25:
            spec = random_fixed_spec(rng, cfg, 16)
            if spec is None:
                continue
            fast = check_assumption2(spec, cfg, mode="exhaustive").satisfied
            assert fast == naive_check_assumption2(spec, cfg)
            checked += 1

    def test_visited_mode_only_checks_supplied_sets(self):
        spec = FixedCountSpec(
            {
                0: {combo(0, [0, 1]): 3, combo(0, [0, 1, 2]): 1},
                1: {combo(1, [0]): 4, combo(1, [0, 1]): 2, combo(1, [0, 1, 2]): 1},
            }
        )
        # features (0,0) and (0,1) tie at the empty learned set
        assert not check_assumption2(
            spec, CFG23, mode="visited", visited=[frozenset()]
        ).satisfied
        covering = frozenset({FeatureId(0, 0), FeatureId(0, 1)})
        assert check_assumption2(
            spec, CFG23, mode="visited", visited=[covering]
        ).satisfied


class TestSampling:
    def test_sampled_specs_pass_exhaustive_check(self):
        rng = random.Random(2)
        cfg = FrameworkConfig(2, 5, 2, 3)
        for _ in range(5):
            spec = sample_satisfying_spec(rng, cfg, 30)
            assert check_assumption2(spec, cfg, mode="exhaustive").satisfied
            assert spec.chunk_size <= 30

    def test_full_support_spec_contains_every_combo(self):
        cfg = FrameworkConfig(2, 3, 2, 2)
        spec = full_support_spec(random.Random(0), cfg)
        for c in range(2):
            assert len(spec.per_class[c]) == 2**3 - 1


class TestSerialization:
    def test_schedule_json_round_trip(self):
        spec = FixedCountSpec(
            {0: {combo(0, [0, 1]): 2}, 1: {combo(1, [0]): 1}}
        )
        schedule = gen_fixed_instance(spec, 3, random.Random(7))
        text = schedule_to_json(schedule)
        json.loads(text)
        assert schedule_from_json(text) == schedule

    def test_fixed_spec_from_toml(self):
        doc = {
            "framework": {
                "num_classes": 2,
                "features_per_class": 3,
                "classify_threshold": 2,
                "learn_threshold": 2,
            },
            "combo": [
                {"class_index": 0, "features": [0, 1], "count": 2},
                {"class_index": 1, "features": [0], "count": 1},
            ],
        }
        cfg, spec = fixed_spec_from_toml(doc)
        assert cfg == CFG23
        assert spec.chunk_size == 3
        assert spec.per_class[0][combo(0, [0, 1])] == 2
