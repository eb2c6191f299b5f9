"""Exact discrete simulator of feature learning under warm and cold restarts,
plus a minimal neural harness for direction-aware weight reinitialization."""

__version__ = "0.1.0"

from .framework import (
    Chunk,
    DataPoint,
    FeatureCombo,
    FeatureId,
    FrameworkConfig,
    TrainState,
    combo,
    training_process,
)
from .strategies import (
    ExperimentSchedule,
    RunRecord,
    accuracy_exact,
    run_strategy,
    training_time,
)
from .instances import (
    BernoulliSpec,
    FixedCountSpec,
    check_assumption2,
    gen_bernoulli_instance,
    gen_fixed_instance,
)
from .theorems import (
    run_figure3_experiment,
    run_verification_suite,
    verify_theorem1,
    verify_theorem2,
)

__all__ = [
    "__version__",
    "Chunk",
    "DataPoint",
    "FeatureCombo",
    "FeatureId",
    "FrameworkConfig",
    "TrainState",
    "combo",
    "training_process",
    "ExperimentSchedule",
    "RunRecord",
    "accuracy_exact",
    "run_strategy",
    "training_time",
    "BernoulliSpec",
    "FixedCountSpec",
    "check_assumption2",
    "gen_bernoulli_instance",
    "gen_fixed_instance",
    "run_figure3_experiment",
    "run_verification_suite",
    "verify_theorem1",
    "verify_theorem2",
]
