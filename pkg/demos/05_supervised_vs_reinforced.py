"""Supervised labels vs learning by interaction, on the same problem.

The supervised baseline gets the exhaustive-search optimum as a label for
every status; the reinforced learner only observes the outcome of its own
sampled actions. Supervision is feasible almost immediately (it imitates
feasible labels), while the reinforced learner starts out violating capacity
several times as often and must discover the prices itself - note that its
raw rate is meanwhile inflated, since overloading a station costs nothing in
rate terms. It needs an oracle that is exactly what becomes unavailable in
realistic settings; the reinforced learner ends at the same point without one.
"""

import numpy as np

from pdlearn.envs import UserAssocEnv
from pdlearn.harness import ExperimentConfig, run_experiment
from pdlearn.trainers import evaluate_policy

ITERATIONS = 40_000

base = dict(iterations=ITERATIONS, eval_every=1_000, eval_samples=4_000, seed=0)
env = UserAssocEnv()
oracle_rate, _ = evaluate_policy(
    lambda H: env.oracle_batch(H)[0], env, 10_000, rng=np.random.default_rng(123)
)

supervised = run_experiment(ExperimentConfig(algorithm="supervised", **base))
reinforced = run_experiment(ExperimentConfig(algorithm="model-free-sto", **base))

print(f"{'iteration':>9s} {'supervised':>11s} {'reinforced':>11s} {'sup viol':>9s} {'rein viol':>10s}")
for s, r in zip(supervised.records, reinforced.records):
    print(
        f"{s.iteration:>9d} {s.avg_rate/oracle_rate:>11.4f} {r.avg_rate/oracle_rate:>11.4f} "
        f"{s.violation_prob:>9.3f} {r.violation_prob:>10.3f}"
    )

print(
    f"\nfinal fresh-sample rates: supervised {supervised.final_rate/oracle_rate:.4f}, "
    f"reinforced {reinforced.final_rate/oracle_rate:.4f} (of oracle)"
)
print("supervision is feasible from the start; interaction matches it without labels")
