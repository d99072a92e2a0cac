"""Built-in verification suite behind the ``selftest`` CLI subcommand.

Three check families, all deterministic under a fixed internal seed:
finite-difference validation of the network gradients, exact-enumeration
validation of the score-function policy-gradient estimator (including
baseline invariance), and oracle property checks (exhaustive search and
water-filling).
"""

from __future__ import annotations

import itertools
import time

import numpy as np

from . import nets, trainers
from .envs import (
    PowerControlConfig,
    PowerControlEnv,
    UserAssocConfig,
    UserAssocEnv,
    waterfilling_oracle,
)

SELFTEST_SEED = 20240

FD_EPS = 1e-5
FD_REL_TOL = 1e-4


def _fd_param_gradients(mlp, x, output_grad):
    """Central finite differences of sum(output_grad * forward(x)) per parameter."""
    grads_w, grads_b = [], []
    G = np.asarray(output_grad, dtype=float)

    def scalar():
        out, _ = nets.forward(mlp, x)
        return float((G * out).sum())

    for arr_list, acc in ((mlp.weights, grads_w), (mlp.biases, grads_b)):
        for arr in arr_list:
            g = np.zeros_like(arr)
            flat = arr.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + FD_EPS
                hi = scalar()
                flat[i] = orig - FD_EPS
                lo = scalar()
                flat[i] = orig
                gflat[i] = (hi - lo) / (2 * FD_EPS)
            acc.append(g)
    return nets.MlpGrads(grads_w, grads_b)


def _fd_input_gradient(mlp, x, output_grad):
    G = np.asarray(output_grad, dtype=float)
    x = np.asarray(x, dtype=float).copy()
    g = np.zeros_like(x)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + FD_EPS
        hi = float((G * nets.forward(mlp, x)[0]).sum())
        x[i] = orig - FD_EPS
        lo = float((G * nets.forward(mlp, x)[0]).sum())
        x[i] = orig
        g[i] = (hi - lo) / (2 * FD_EPS)
    return g


def max_rel_error(analytic, reference, floor=1e-3):
    return float(np.max(np.abs(analytic - reference) / np.maximum(np.abs(reference), floor)))


def _random_spec(rng, output_activation):
    sizes = tuple(int(rng.integers(2, 7)) for _ in range(int(rng.integers(3, 5))))
    group = 0
    if output_activation == "grouped_softmax":
        group = int(rng.integers(2, 4))
        sizes = sizes[:-1] + (group * int(rng.integers(1, 4)),)
    return nets.MlpSpec(sizes, output_activation=output_activation, group_size=group)


def check_gradients(num_nets=30, seed=SELFTEST_SEED):
    """Backprop vs central finite differences over random nets and heads."""
    rng = np.random.default_rng(seed)
    heads = ("identity", "relu", "grouped_softmax")
    worst = 0.0
    for i in range(num_nets):
        spec = _random_spec(rng, heads[i % len(heads)])
        mlp = nets.init_mlp(spec, int(rng.integers(0, 2**31)))
        x = rng.normal(size=spec.input_size)
        g_out = rng.normal(size=spec.output_size)
        _, trace = nets.forward(mlp, x)
        ana = nets.backward_params(mlp, trace, g_out)
        ref = _fd_param_gradients(mlp, x, g_out)
        for a, r in zip(ana.weights + ana.biases, ref.weights + ref.biases):
            worst = max(worst, max_rel_error(a, r))
        worst = max(
            worst,
            max_rel_error(
                nets.backward_input(mlp, trace, g_out), _fd_input_gradient(mlp, x, g_out)
            ),
        )
    return worst <= FD_REL_TOL, f"max rel err {worst:.2e} (tol {FD_REL_TOL:.0e})"


def check_estimator(seed=SELFTEST_SEED):
    """Score-function estimator expectation == exact gradient of E_x[L].

    Enumerates both actions of a one-user, two-BS instance; also verifies
    that a constant baseline leaves the expectation unchanged.
    """
    rng = np.random.default_rng(seed)
    env = UserAssocEnv(UserAssocConfig(num_users=1, num_bs=2, capacity=1))
    learner = trainers.make_stochastic_learner(env.model_free(), hidden=(8,), seed=seed)
    h = env.sample_status(rng, 1)
    f = env.features(h)
    probs, trace = nets.forward(learner.policy_net, f)
    lam, _ = nets.forward(learner.multiplier_net, f)

    def param_vec(grads):
        return np.concatenate([a.ravel() for a in grads.weights + grads.biases])

    lagrangians = []
    grad_pi = []
    for action in (0, 1):
        X = np.array([[action]])
        J, G, _ = env.observe_batch(h, X)
        sample = trainers.LagrangianSample.from_parts(
            J[0], G[0], lam[0], learner.objective_scale
        )
        lagrangians.append(sample.lagrangian)
        onehot = np.zeros_like(probs)
        onehot[0, action] = 1.0
        grad_pi.append(param_vec(nets.backward_params(learner.policy_net, trace, onehot)))

    exact = sum(L * g for L, g in zip(lagrangians, grad_pi))
    worst = 0.0
    for baseline in (0.0, 3.7):
        estim = np.zeros_like(exact)
        for action, L in zip((0, 1), lagrangians):
            pi = probs[0, action]
            score = trainers.policy_score_output_grad(
                probs, np.array([[action]]), np.array([L - baseline]), learner.num_bs
            )
            estim += pi * param_vec(
                nets.backward_params(learner.policy_net, trace, score)
            )
        worst = max(worst, float(np.abs(estim - exact).max()))
    return worst <= 1e-10, f"max abs deviation {worst:.2e} (tol 1e-10)"


def check_oracles(seed=SELFTEST_SEED, num_statuses=200):
    """Exhaustive-search feasibility/optimality and water-filling budget equation."""
    rng = np.random.default_rng(seed)
    env = UserAssocEnv()
    snrs = env.sample_status(rng, num_statuses)
    best_assoc, best_rate = env.oracle_batch(snrs)
    for i in range(num_statuses):
        if (env.capacity_violation(best_assoc[i]) > 0).any():
            return False, f"oracle produced an infeasible association at status {i}"
        # independent re-enumeration
        expected = -np.inf
        for assoc in itertools.product(range(env.num_bs), repeat=env.num_users):
            if (env.capacity_violation(np.array(assoc)) > 0).any():
                continue
            expected = max(expected, env.sum_rate(np.array(assoc), snrs[i]))
        if abs(best_rate[i] - expected) > 1e-6:
            return False, f"oracle rate mismatch at status {i}"

    pc = PowerControlEnv(PowerControlConfig())
    gains = pc.sample_status(rng, 10_000)
    _, policy = waterfilling_oracle(gains, pc.budget, pc.noise)
    gap = abs(policy(gains).mean() - pc.budget)
    if gap > 1e-6 * pc.budget:
        return False, f"water-filling budget gap {gap:.2e}"
    return True, "exhaustive + water-filling oracles consistent"


CHECKS = (
    ("gradient_finite_difference", check_gradients),
    ("estimator_unbiasedness", check_estimator),
    ("oracle_properties", check_oracles),
)


def run_selftest(print_fn=print) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        start = time.perf_counter()
        ok, detail = fn()
        elapsed = time.perf_counter() - start
        all_ok &= ok
        print_fn(f"[{'PASS' if ok else 'FAIL'}] {name:<28s} {detail} ({elapsed:.2f}s)")
    return all_ok
