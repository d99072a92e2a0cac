"""Fading-channel power control with an average transmit-power budget.

The status is a scalar channel power gain (exponential, i.e. Rayleigh
amplitude fading); the action is an instantaneous transmit power. The
objective is the instantaneous spectral efficiency log2(1 + p*g/noise) whose
average is the ergodic capacity, constrained by E[p] <= budget. The known
optimum is water-filling, solved here by bisection on the water level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ModelAccessError, Observation

LN2 = np.log(2.0)


@dataclass(frozen=True)
class PowerControlConfig:
    avg_power_budget: float = 1.0  # W
    mean_channel_gain: float = 1.0
    noise_power: float = 1.0  # W

    def __post_init__(self):
        for key in ("avg_power_budget", "mean_channel_gain", "noise_power"):
            if getattr(self, key) <= 0:
                raise ValueError(f"{key} must be positive")


def instant_rate(p, g, noise) -> float:
    """Spectral efficiency log2(1 + p*g/noise) in bit/s/Hz."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("transmit power must be >= 0")
    return np.log2(1.0 + p * np.asarray(g, dtype=float) / noise)


def waterfilling_oracle(gain_samples, budget, noise, rel_tol=1e-6, max_iter=500):
    """Water level for E[p] = budget over the sample set, by bisection.

    Returns (nu, policy) with policy(g) = max(0, 1/nu - noise/g). The empirical
    mean of policy over ``gain_samples`` matches ``budget`` within
    ``rel_tol * budget``.
    """
    gains = np.asarray(gain_samples, dtype=float)
    if gains.size == 0:
        raise ValueError("waterfilling needs a nonempty gain sample set")
    if budget <= 0:
        raise ValueError("power budget must be positive")
    if not np.isfinite(gains).all() or (gains <= 0).any():
        raise ValueError("bisection bracket failure: degenerate gain samples")
    inv = noise / gains

    def mean_power(level):
        return np.maximum(0.0, level - inv).mean()

    lo, hi = 0.0, budget + inv.min()
    for _ in range(max_iter):
        if mean_power(hi) >= budget:
            break
        hi *= 2.0
    else:
        raise ValueError("bisection bracket failure: degenerate gain samples")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = mean_power(mid) - budget
        if abs(err) <= rel_tol * budget:
            nu = 1.0 / mid
            return nu, lambda g: np.maximum(0.0, mid - noise / np.asarray(g, dtype=float))
        if err > 0:
            hi = mid
        else:
            lo = mid
    raise ValueError("bisection failed to reach tolerance")


class PowerControlEnv:
    def __init__(self, config: PowerControlConfig = PowerControlConfig()):
        self.config = config
        self.budget = config.avg_power_budget
        self.noise = config.noise_power
        self.feature_dim = 2
        self.action_dim = 1
        self.num_instant_constraints = 0
        self.num_avg_constraints = 1
        self.objective_scale = 1.0  # bit/s/Hz is already O(1)
        # nominal action range top (water-level scale) for exploration sizing
        self.action_high = 2.5 * config.avg_power_budget

    def sample_status(self, rng, n=None):
        """Exponential channel power gain(s) with the configured mean."""
        size = None if n is None else n
        return rng.exponential(self.config.mean_channel_gain, size=size)

    def features(self, gains):
        """Network input (g, ln g): the log channel captures the near-cutoff
        curvature that raw gain alone resolves poorly."""
        g = np.asarray(gains, dtype=float)
        return np.stack([g, np.log(g)], axis=-1)

    def observe(self, g, p) -> Observation:
        rate = float(instant_rate(p, g, self.noise))
        return Observation(rate, avg_constraint_terms=np.array([float(p) - self.budget]))

    def observe_batch(self, gains, powers):
        """(gains (n,), powers (n,)) -> (rates (n,), g (n,0), c (n,1))."""
        rates = instant_rate(powers, gains, self.noise)
        n = rates.shape[0]
        return rates, np.zeros((n, 0)), (np.asarray(powers, dtype=float) - self.budget)[:, None]

    def analytic_gradients(self, g, p):
        """(dJ/dp, dg_i/dp, dc_j/dp) of the known model, elementwise over batches."""
        g = np.asarray(g, dtype=float)
        p = np.asarray(p, dtype=float)
        djdp = (g / self.noise) / (LN2 * (1.0 + p * g / self.noise))
        return djdp, np.zeros((0,) + p.shape), np.ones((1,) + p.shape)

    def oracle_policy(self, gain_samples):
        """Water-filling policy calibrated on a gain sample set."""
        _, policy = waterfilling_oracle(gain_samples, self.budget, self.noise)
        return policy

    def model_free(self):
        return ModelFreePowerControl(self)


class ModelFreePowerControl:
    """Observation-only handle for the power-control environment."""

    def __init__(self, env: PowerControlEnv):
        self._env = env
        self.feature_dim = env.feature_dim
        self.action_dim = env.action_dim
        self.num_instant_constraints = 0
        self.num_avg_constraints = 1
        self.objective_scale = 1.0
        self.budget = env.budget
        self.action_high = env.action_high

    def sample_status(self, rng, n=None):
        return self._env.sample_status(rng, n)

    def features(self, gains):
        return self._env.features(gains)

    def observe(self, g, p) -> Observation:
        return self._env.observe(g, p)

    def observe_batch(self, gains, powers):
        return self._env.observe_batch(gains, powers)

    def analytic_gradients(self, g, p):
        raise ModelAccessError("model-free handle does not expose analytic gradients")
