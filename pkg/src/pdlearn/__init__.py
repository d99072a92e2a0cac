"""Primal-dual neural learning for constrained wireless resource optimization.

The package learns solution policies for constrained (functional) optimization
problems by training small policy/multiplier/value networks toward the saddle
point of the Lagrangian, with or without an analytic environment model, and
ships exact oracles (exhaustive search, water-filling) for verification.
"""

from .envs import (
    ModelAccessError,
    Observation,
    PowerControlConfig,
    PowerControlEnv,
    UserAssocConfig,
    UserAssocEnv,
    instant_rate,
    sum_rate,
    waterfilling_oracle,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    MetricRecord,
    OracleComparison,
    RunResult,
    compare_to_oracle,
    moving_average,
    run_experiment,
)
from .nets import (
    DivergenceError,
    ForwardTrace,
    Mlp,
    MlpGrads,
    MlpSpec,
    backward_input,
    backward_params,
    forward,
    init_mlp,
    lr_schedule,
    sgd_step,
)
from .trainers import (
    DeterministicLearner,
    LagrangianSample,
    StepMetrics,
    StochasticLearner,
    SupervisedLearner,
    evaluate_policy,
    make_deterministic_learner,
    make_stochastic_learner,
    make_supervised_learner,
    modelbased_det_step,
    modelfree_det_step,
    stochastic_step,
    supervised_step,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DeterministicLearner",
    "DivergenceError",
    "ExperimentConfig",
    "ForwardTrace",
    "LagrangianSample",
    "MetricRecord",
    "Mlp",
    "MlpGrads",
    "MlpSpec",
    "ModelAccessError",
    "Observation",
    "OracleComparison",
    "PowerControlConfig",
    "PowerControlEnv",
    "RunResult",
    "StepMetrics",
    "StochasticLearner",
    "SupervisedLearner",
    "UserAssocConfig",
    "UserAssocEnv",
    "backward_input",
    "backward_params",
    "compare_to_oracle",
    "evaluate_policy",
    "forward",
    "init_mlp",
    "instant_rate",
    "lr_schedule",
    "make_deterministic_learner",
    "make_stochastic_learner",
    "make_supervised_learner",
    "modelbased_det_step",
    "modelfree_det_step",
    "moving_average",
    "run_experiment",
    "sgd_step",
    "stochastic_step",
    "sum_rate",
    "supervised_step",
    "waterfilling_oracle",
]
