"""Experiment orchestration: seeding, training loops, metric recording.

One experiment = one config = one master seed. The seed spawns four
independent child streams, consumed in this fixed order of purposes:

  init   -> network initialization (integer seeds derived per network)
  train  -> everything a *_step draws (statuses, action sampling, noise)
  eval   -> the per-iteration online probe (one fresh status + action)
  final  -> the post-training Monte-Carlo evaluation on eval_samples statuses

The online probe feeds the 500-iteration moving averages recorded every
``eval_every`` steps; because it has its own stream, disabling it can never
perturb the training draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import trainers
from .envs import (
    PowerControlConfig,
    PowerControlEnv,
    UserAssocConfig,
    UserAssocEnv,
    waterfilling_oracle,
)
from .nets import DivergenceError, forward

PROBLEMS = ("user-assoc", "power-control")
ALGORITHMS = ("model-based", "model-free-det", "model-free-sto", "supervised", "oracle")
EVAL_MODES = ("sample", "argmax")

MOVING_AVERAGE_WINDOW = 500


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "user-assoc"
    algorithm: str = "model-free-sto"
    env: object = field(default_factory=UserAssocConfig)
    hidden_sizes: tuple = (20, 20)
    value_hidden_sizes: tuple | None = None  # None -> hidden_sizes
    lr_base: float = 0.01
    lr_decay: float = 0.001
    batch_size: int = 16
    baseline: str = "lagrangian"
    noise_sigma0: float | None = None  # None -> 10% of the env action range
    noise_decay: float = 0.001
    iterations: int = 200_000
    seed: int = 0
    eval_every: int = 500
    eval_samples: int = 1000
    eval_mode: str = "sample"

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem: must be one of {PROBLEMS}, got {self.problem!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"algorithm: must be one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        if self.problem == "user-assoc":
            if not isinstance(self.env, UserAssocConfig):
                raise ConfigError("env: expected user-association parameters")
            if self.algorithm in ("model-based", "model-free-det"):
                raise ConfigError(
                    f"algorithm: {self.algorithm!r} needs a continuous action space; "
                    "user-assoc supports model-free-sto, supervised, oracle"
                )
        else:
            if not isinstance(self.env, PowerControlConfig):
                raise ConfigError("env: expected power-control parameters")
            if self.algorithm in ("model-free-sto", "supervised"):
                raise ConfigError(
                    f"algorithm: {self.algorithm!r} needs discrete actions; "
                    "power-control supports model-based, model-free-det, oracle"
                )
        for key in ("iterations", "batch_size", "eval_every", "eval_samples"):
            v = getattr(self, key)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{key}: must be a positive integer, got {v!r}")
        for key in ("hidden_sizes", "value_hidden_sizes"):
            sizes = getattr(self, key)
            if sizes is None and key == "value_hidden_sizes":
                continue
            if len(sizes) < 1 or any(not isinstance(s, int) or s < 1 for s in sizes):
                raise ConfigError(f"{key}: must be positive integers, got {sizes!r}")
        if self.lr_base <= 0 or self.lr_decay < 0:
            raise ConfigError("lr_base must be > 0 and lr_decay >= 0")
        if self.baseline not in trainers.BASELINE_MODES:
            raise ConfigError(f"baseline: must be one of {trainers.BASELINE_MODES}")
        if self.eval_mode not in EVAL_MODES:
            raise ConfigError(f"eval_mode: must be one of {EVAL_MODES}")
        if not isinstance(self.seed, int):
            raise ConfigError(f"seed: must be an integer, got {self.seed!r}")
        if self.noise_sigma0 is not None and self.noise_sigma0 < 0:
            raise ConfigError("noise_sigma0: must be >= 0")


@dataclass(frozen=True)
class MetricRecord:
    iteration: int
    avg_rate: float  # trailing 500-iteration moving average, natural units
    violation_prob: float
    lagrangian: float
    multiplier_norm: float


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list
    diverged: bool
    final_rate: float  # Monte-Carlo eval on eval_samples fresh statuses
    final_violation: float

    @property
    def final_record(self) -> MetricRecord:
        if not self.records:
            raise ValueError("run produced no records")
        return self.records[-1]


def moving_average(series, window=MOVING_AVERAGE_WINDOW):
    """Trailing mean over the last min(window, elements-so-far) values."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("moving_average of an empty series")
    if window < 1:
        raise ValueError("window must be >= 1")
    cs = np.concatenate([[0.0], np.cumsum(series)])
    n = series.size
    counts = np.minimum(np.arange(1, n + 1), window)
    return (cs[1:] - cs[np.maximum(np.arange(1, n + 1) - window, 0)]) / counts


def make_env(config: ExperimentConfig):
    if config.problem == "user-assoc":
        return UserAssocEnv(config.env)
    return PowerControlEnv(config.env)


def _build_learner(config, env, init_seed):
    kwargs = dict(
        hidden=config.hidden_sizes,
        seed=init_seed,
        batch_size=config.batch_size,
        lr_base=config.lr_base,
        lr_decay=config.lr_decay,
    )
    algo = config.algorithm
    if algo == "model-free-sto":
        return trainers.make_stochastic_learner(
            env.model_free(), baseline=config.baseline, **kwargs
        )
    if algo == "supervised":
        return trainers.make_supervised_learner(env.model_free(), **kwargs)
    if algo in ("model-based", "model-free-det"):
        target = env if algo == "model-based" else env.model_free()
        return trainers.make_deterministic_learner(
            target,
            model_free=(algo == "model-free-det"),
            noise_sigma0=config.noise_sigma0,
            noise_decay=config.noise_decay,
            value_hidden=config.value_hidden_sizes,
            **kwargs,
        )
    return None  # oracle: nothing to train


def _oracle_probe_policy(config, env, init_rng):
    if config.problem == "user-assoc":
        return lambda H: env.oracle_batch(H)[0]
    calibration = env.sample_status(init_rng, 10_000)
    policy = env.oracle_policy(calibration)
    return lambda H: policy(H)


def _probe(config, env, learner, probe_policy, eval_rng):
    """One fresh status + one action -> (objective, violated?)."""
    H = env.sample_status(eval_rng, 1)
    if probe_policy is not None:
        X = probe_policy(H)
    elif isinstance(learner, trainers.DeterministicLearner):
        P, _ = forward(learner.policy_net, env.features(H))
        X = P[:, 0]
    else:
        X = trainers.policy_actions(learner, env, H, config.eval_mode, eval_rng)
    J, G, _ = env.observe_batch(H, X)
    violated = bool((G[0] > 0).any()) if G.shape[1] else False
    return float(J[0]), violated


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Train (or replay the oracle) per ``config`` and record metric history.

    Fully deterministic given the config, including the seed. On divergence
    the partial record list is returned with ``diverged`` set instead of
    raising, so sweeps can continue.
    """
    config.validate()
    env = make_env(config)
    init_ss, train_ss, eval_ss, final_ss = np.random.SeedSequence(config.seed).spawn(4)
    train_rng = np.random.default_rng(train_ss)
    eval_rng = np.random.default_rng(eval_ss)
    init_seed = int(init_ss.generate_state(1)[0])

    learner = _build_learner(config, env, init_seed)
    probe_policy = None
    step = None
    algo = config.algorithm
    if algo == "oracle":
        probe_policy = _oracle_probe_policy(config, env, np.random.default_rng(init_ss))
    elif algo == "model-free-sto":
        step = lambda: trainers.stochastic_step(learner, env.model_free(), train_rng)
    elif algo == "supervised":
        step = lambda: trainers.supervised_step(
            learner, env.model_free(), lambda H: env.oracle_batch(H)[0], train_rng
        )
    elif algo == "model-based":
        step = lambda: trainers.modelbased_det_step(learner, env, train_rng)
    else:
        step = lambda: trainers.modelfree_det_step(learner, env.model_free(), train_rng)

    rates = np.zeros(config.iterations)
    viols = np.zeros(config.iterations)
    lagrs = np.zeros(config.iterations)
    records = []
    diverged = False
    done = 0
    window = MOVING_AVERAGE_WINDOW
    for t in range(config.iterations):
        metrics = None
        if step is not None:
            try:
                metrics = step()
            except DivergenceError:
                diverged = True
                break
        rate, violated = _probe(config, env, learner, probe_policy, eval_rng)
        rates[t] = rate
        viols[t] = float(violated)
        lagrs[t] = metrics.lagrangian_mean if metrics else 0.0
        done = t + 1
        if done % config.eval_every == 0:
            lo = max(0, done - window)
            records.append(
                MetricRecord(
                    iteration=done,
                    avg_rate=float(rates[lo:done].mean()),
                    violation_prob=float(viols[lo:done].mean()),
                    lagrangian=float(lagrs[lo:done].mean()),
                    multiplier_norm=metrics.multiplier_norm if metrics else 0.0,
                )
            )

    if diverged:
        final_rate, final_violation = float("nan"), float("nan")
    else:
        policy = probe_policy if probe_policy is not None else _final_policy(learner, env)
        final_rate, final_violation = trainers.evaluate_policy(
            policy, env, config.eval_samples, config.eval_mode, np.random.default_rng(final_ss)
        )
    return RunResult(config, records, diverged, final_rate, final_violation)


def _final_policy(learner, env):
    if isinstance(learner, trainers.DeterministicLearner):
        return lambda H: forward(learner.policy_net, env.features(H))[0][:, 0]
    return learner


@dataclass(frozen=True)
class OracleComparison:
    ratio: float  # final moving-average rate / oracle's
    violation_gap: float


def compare_to_oracle(result: RunResult, oracle_result: RunResult) -> OracleComparison:
    learned = result.final_record
    oracle = oracle_result.final_record
    if oracle.avg_rate == 0.0:
        raise ValueError("oracle average rate is zero")
    return OracleComparison(
        ratio=learned.avg_rate / oracle.avg_rate,
        violation_gap=learned.violation_prob - oracle.violation_prob,
    )


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(config, seed=seed)
