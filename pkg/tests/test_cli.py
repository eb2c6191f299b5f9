"""End-to-end CLI tests: subcommand behavior, exit codes, determinism."""

import json
import os

import pytest

from plasticity_lab.cli import main
from plasticity_lab.instances import schedule_from_json

INSTANCE_TOML = """
experiments = 3
seed = 1

[framework]
num_classes = 2
features_per_class = 3
classify_threshold = 2
learn_threshold = 2

[[combo]]
class_index = 0
features = [0]
count = 4
[[combo]]
class_index = 0
features = [0, 1]
count = 2
[[combo]]
class_index = 0
features = [0, 1, 2]
count = 1
[[combo]]
class_index = 1
features = [0]
count = 4
[[combo]]
class_index = 1
features = [0, 1]
count = 2
[[combo]]
class_index = 1
features = [0, 1, 2]
count = 1
"""

RUN_TOML = """
method = "warm"
seed = 3
chunk_count = 2

[net]
hidden = [16]

[dataset]
source = "synthetic"
num_classes = 3
noise_dims = 8
noise_strength = 1.0
feature_strength = 1.0
points_per_chunk = 48
inclusion_probs = [0.8, 0.4, 0.2]
test_size = 96

[train]
target_train_accuracy = 0.97
max_steps = 3000
"""


@pytest.fixture
def instance_config(tmp_path):
    path = tmp_path / "instance.toml"
    path.write_text(INSTANCE_TOML)
    return str(path)


@pytest.fixture
def run_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(RUN_TOML)
    return str(path)


def strip_wall_ms(csv_text):
    return [line.rsplit(",", 1)[0] for line in csv_text.splitlines()]


class TestExitCodes:
    def test_help_exits_zero(self, capsys):
        assert main(["simulate", "--help"]) == 0
        assert "usage" in capsys.readouterr().out

    def test_unknown_subcommand_exits_one(self, capsys):
        assert main(["defrobulate"]) == 1

    def test_unknown_flag_exits_one(self, instance_config):
        assert main(["simulate", "--config", instance_config, "--bogus"]) == 1

    def test_missing_config_exits_one_with_path(self, tmp_path, capsys):
        missing = str(tmp_path / "nope.toml")
        assert main(["simulate", "--config", missing]) == 1
        assert missing in capsys.readouterr().err

    def test_invalid_toml_exits_one(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("method = [unclosed")
        assert main(["train", "--config", str(path)]) == 1

    def test_framework_mode_rejected_by_train(self, tmp_path):
        path = tmp_path / "fw.toml"
        path.write_text('mode = "framework"\n')
        assert main(["train", "--config", str(path)]) == 1


class TestSimulate:
    def test_writes_strategy_csv(self, instance_config, tmp_path):
        out = str(tmp_path / "records.csv")
        assert main(["simulate", "--config", instance_config, "--out", out]) == 0
        lines = open(out).read().splitlines()
        header = "strategy,seed,experiment,active_at_start,learned_count,memorized_count,test_acc"
        assert lines[0] == header
        assert len(lines) == 1 + 3 * 3
        strategies = {line.split(",")[0] for line in lines[1:]}
        assert strategies == {"cold", "warm", "ideal"}
        # exact accuracies serialize as rationals
        assert "/" in lines[1].rsplit(",", 1)[1]

    def test_single_strategy_selection(self, instance_config, tmp_path):
        out = str(tmp_path / "cold.csv")
        assert main(
            ["simulate", "--config", instance_config, "--strategy", "cold", "--out", out]
        ) == 0
        lines = open(out).read().splitlines()[1:]
        assert all(line.startswith("cold,") for line in lines)

    def test_deterministic(self, instance_config, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        main(["simulate", "--config", instance_config, "--out", a])
        main(["simulate", "--config", instance_config, "--out", b])
        assert open(a).read() == open(b).read()


class TestVerifyTheorems:
    def test_small_suite_passes(self, tmp_path):
        out = str(tmp_path / "report.json")
        code = main(
            ["verify-theorems", "--instances", "3", "--seed", "4", "--out", out]
        )
        assert code == 0
        doc = json.load(open(out))
        assert doc["all_passed"] is True
        assert len(doc["theorem1"]) == 3


class TestFigure3:
    def test_small_report(self, tmp_path):
        out = str(tmp_path / "fig3.json")
        code = main(
            [
                "figure3", "--seeds", "1", "--seed", "0", "--experiments", "5",
                "--chunk-size", "100", "--test-size", "200", "--out", out,
            ]
        )
        assert code == 0
        doc = json.load(open(out))
        assert len(doc["mean_accuracy"]["warm"]) == 5


class TestTrain:
    def test_run_and_outputs(self, run_config, tmp_path):
        out = str(tmp_path / "results")
        assert main(["train", "--config", run_config, "--out", out]) == 0
        lines = open(os.path.join(out, "results.csv")).read().splitlines()
        assert lines[0] == "method,seed,experiment,test_acc,steps,converged,wall_ms"
        assert len(lines) == 3
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["method"] == "warm" and manifest["seed"] == 3

    def test_byte_identical_rerun_excluding_wall_ms(self, run_config, tmp_path):
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        main(["train", "--config", run_config, "--out", out_a])
        main(["train", "--config", run_config, "--out", out_b])
        a = strip_wall_ms(open(os.path.join(out_a, "results.csv")).read())
        b = strip_wall_ms(open(os.path.join(out_b, "results.csv")).read())
        assert a == b

    def test_seed_flag_overrides(self, run_config, tmp_path):
        out = str(tmp_path / "seeded")
        main(["train", "--config", run_config, "--seed", "11", "--out", out])
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["seed"] == 11

    def test_env_seed_override(self, run_config, tmp_path, monkeypatch):
        monkeypatch.setenv("PLASTICITY_LAB_SEED", "42")
        out = str(tmp_path / "env")
        main(["train", "--config", run_config, "--out", out])
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["seed"] == 42

    def test_sweep_table(self, tmp_path):
        path = tmp_path / "sweep.toml"
        path.write_text(
            RUN_TOML + '\n[sweep]\nmethods = ["cold", "warm"]\nseeds = [0, 1]\n'
        )
        out = str(tmp_path / "sweep_out")
        assert main(["train", "--config", str(path), "--out", out]) == 0
        lines = open(os.path.join(out, "results.csv")).read().splitlines()[1:]
        keys = [tuple(line.split(",")[:3]) for line in lines]
        assert keys == sorted(keys)
        assert len(lines) == 2 * 2 * 2


class TestGenerators:
    def test_gen_instance_round_trip(self, instance_config, tmp_path):
        out = str(tmp_path / "instance.json")
        assert main(["gen-instance", "--config", instance_config, "--out", out]) == 0
        schedule = schedule_from_json(open(out).read())
        assert schedule.num_experiments == 3
        assert len(schedule.chunks[0]) == 14

    def test_gen_dataset_csvs(self, run_config, tmp_path):
        out = str(tmp_path / "data")
        assert main(["gen-dataset", "--config", run_config, "--out", out]) == 0
        train = open(os.path.join(out, "train.csv")).read().splitlines()
        test = open(os.path.join(out, "test.csv")).read().splitlines()
        assert train[0].endswith(",label")
        assert len(train) == 1 + 2 * 48
        assert len(test) == 1 + 96
