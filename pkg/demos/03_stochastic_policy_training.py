"""Learning the user association without labels or an analytic model.

The stochastic-policy learner only ever sees (status, action) -> (sum rate,
per-BS overload) observations. It trains three networks toward the saddle
point of the Lagrangian: the policy samples associations, the multiplier
network prices capacity violations per status, and the value network supplies
the variance-reducing baseline. This demo runs a shortened session (30k
iterations, ~15 s) and prints the convergence table; the dedicated experiment
harness and CLI run the full-length version.
"""

import numpy as np

from pdlearn.envs import UserAssocEnv
from pdlearn.harness import ExperimentConfig, run_experiment
from pdlearn.trainers import evaluate_policy

cfg = ExperimentConfig(iterations=30_000, eval_every=2_000, eval_samples=4_000, seed=0)
env = UserAssocEnv(cfg.env)
oracle_rate, _ = evaluate_policy(
    lambda H: env.oracle_batch(H)[0], env, 10_000, rng=np.random.default_rng(123)
)
print(f"oracle Monte-Carlo mean rate: {oracle_rate/1e6:.1f} Mbit/s\n")

result = run_experiment(cfg)

print(f"{'iteration':>9s} {'rate/oracle':>12s} {'violation':>10s} {'lagrangian':>11s} {'|lambda|':>9s}")
for rec in result.records:
    print(
        f"{rec.iteration:>9d} {rec.avg_rate/oracle_rate:>12.4f} "
        f"{rec.violation_prob:>10.3f} {rec.lagrangian:>11.3f} {rec.multiplier_norm:>9.3f}"
    )

print(
    f"\nfinal fresh-sample evaluation: {result.final_rate/oracle_rate:.4f} of oracle, "
    f"violation probability {result.final_violation:.3f}"
)
print("rates climb toward the oracle while the multiplier prices violations away")
