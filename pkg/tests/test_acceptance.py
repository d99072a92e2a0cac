"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The convergence criteria train full-length runs (2e5 iterations per seed), so
this module takes ~20 minutes; run it with ``pytest tests/test_acceptance.py
-v -s`` to watch the per-criterion lines appear.
"""

import itertools
import json
import time

import numpy as np
import pytest

from pdlearn.cli import main as cli_main
from pdlearn.envs import (
    PowerControlConfig,
    PowerControlEnv,
    UserAssocConfig,
    UserAssocEnv,
    waterfilling_oracle,
)
from pdlearn.harness import ExperimentConfig, run_experiment
from pdlearn.nets import MlpSpec, backward_input, backward_params, forward, init_mlp
from pdlearn.trainers import (
    evaluate_policy,
    make_deterministic_learner,
    make_stochastic_learner,
    modelbased_det_step,
    modelfree_det_step,
    policy_score_output_grad,
)

from fdcheck import fd_input_gradient, fd_param_gradients, grads_max_rel_error, max_rel_error

SEEDS = (0, 1, 2, 3, 4)
ITERATIONS = 200_000
ORACLE_MC_SAMPLES = 10_000


def report(criterion, passed, detail):
    print(f"\n[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return passed


# -- shared expensive runs ---------------------------------------------------


@pytest.fixture(scope="module")
def oracle_mc_rate():
    env = UserAssocEnv()
    rate, _ = evaluate_policy(
        lambda H: env.oracle_batch(H)[0], env, ORACLE_MC_SAMPLES, rng=np.random.default_rng(999)
    )
    return rate


def _train_ua(algorithm, seed):
    cfg = ExperimentConfig(
        algorithm=algorithm, iterations=ITERATIONS, eval_every=500, eval_samples=1000, seed=seed
    )
    result = run_experiment(cfg)
    assert not result.diverged, f"{algorithm} seed {seed} diverged"
    return result


@pytest.fixture(scope="module")
def modelfree_runs():
    return {seed: _train_ua("model-free-sto", seed) for seed in SEEDS}


@pytest.fixture(scope="module")
def supervised_runs():
    return {seed: _train_ua("supervised", seed) for seed in SEEDS}


# -- criterion 1: gradient correctness ---------------------------------------


def test_criterion_1_gradient_correctness():
    rng = np.random.default_rng(12345)
    heads = ("identity", "relu", "grouped_softmax")
    start = time.perf_counter()
    worst = 0.0
    for i in range(100):
        head = heads[i % 3]
        sizes = [int(rng.integers(2, 7)) for _ in range(int(rng.integers(3, 5)))]
        group = 0
        if head == "grouped_softmax":
            group = int(rng.integers(2, 4))
            sizes[-1] = group * int(rng.integers(1, 4))
        spec = MlpSpec(tuple(sizes), output_activation=head, group_size=group)
        net = init_mlp(spec, int(rng.integers(2**31)))
        x = rng.normal(size=spec.input_size)
        g = rng.normal(size=spec.output_size)
        _, trace = forward(net, x)
        worst = max(worst, grads_max_rel_error(
            backward_params(net, trace, g), fd_param_gradients(net, x, g)))
        worst = max(worst, max_rel_error(
            backward_input(net, trace, g), fd_input_gradient(net, x, g)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 10.0
    assert report(
        "criterion 1 (gradient correctness)",
        ok,
        f"100 nets, max rel err {worst:.2e} (tol 1e-4), {elapsed:.1f}s (< 10s)",
    )


# -- criterion 2: estimator correctness --------------------------------------


def test_criterion_2_estimator_exactness():
    start = time.perf_counter()
    # K=1, B=2 instance: both actions enumerable
    env = UserAssocEnv(UserAssocConfig(num_users=1, num_bs=2, capacity=1))
    learner = make_stochastic_learner(env.model_free(), seed=3)
    h = env.sample_status(np.random.default_rng(7), 1)
    f = env.features(h)
    probs, trace = forward(learner.policy_net, f)
    lam, _ = forward(learner.multiplier_net, f)

    def flat(grads):
        return np.concatenate([a.ravel() for a in grads.weights + grads.biases])

    lagr, dpi = [], []
    for action in (0, 1):
        X = np.array([[action]])
        J, G, _ = env.observe_batch(h, X)
        lagr.append(J[0] / learner.objective_scale - float(lam[0] @ G[0]))
        onehot = np.zeros_like(probs)
        onehot[0, action] = 1.0
        dpi.append(flat(backward_params(learner.policy_net, trace, onehot)))
    exact = lagr[0] * dpi[0] + lagr[1] * dpi[1]

    deviations = []
    for baseline in (0.0, 7.7):
        estim = np.zeros_like(exact)
        for action in (0, 1):
            score = policy_score_output_grad(
                probs, np.array([[action]]), np.array([lagr[action] - baseline]), 2
            )
            estim += probs[0, action] * flat(backward_params(learner.policy_net, trace, score))
        deviations.append(float(np.abs(estim - exact).max()))
    elapsed = time.perf_counter() - start
    ok = max(deviations) < 1e-10 and elapsed < 1.0
    assert report(
        "criterion 2 (estimator exactness + baseline invariance)",
        ok,
        f"max abs deviation {max(deviations):.2e} (tol 1e-10), {elapsed:.2f}s (< 1s)",
    )


# -- criterion 3: convergence to the oracle ----------------------------------


def test_criterion_3_stochastic_learner_reaches_oracle(modelfree_runs, oracle_mc_rate):
    outcomes = []
    for seed in SEEDS:
        final = modelfree_runs[seed].final_record
        outcomes.append(
            (seed, final.avg_rate / oracle_mc_rate, final.violation_prob,
             final.avg_rate >= 0.95 * oracle_mc_rate and final.violation_prob <= 0.05)
        )
    passing = sum(1 for *_, ok in outcomes if ok)
    detail = "; ".join(f"seed {s}: ratio {r:.4f} viol {v:.3f} {'ok' if ok else 'FAIL'}"
                       for s, r, v, ok in outcomes)
    assert report(
        "criterion 3 (>=95% of oracle, <=5% violations, >=4/5 seeds)",
        passing >= 4,
        f"{passing}/5 seeds pass; {detail}",
    )


# -- criterion 4: supervised comparison --------------------------------------


def test_criterion_4a_early_phase_rate_ordering(modelfree_runs, supervised_runs):
    early = [i for i, r in enumerate(modelfree_runs[0].records) if 0 < r.iteration <= 5000]
    sup = np.array([[supervised_runs[s].records[i].avg_rate for i in early] for s in SEEDS]).mean(0)
    mf = np.array([[modelfree_runs[s].records[i].avg_rate for i in early] for s in SEEDS]).mean(0)
    iters = [modelfree_runs[0].records[i].iteration for i in early]
    rows = "; ".join(
        f"it {it}: sup/mf {s/m:.4f}" for it, s, m in zip(iters, sup, mf)
    )
    ok = bool((sup > mf).all())
    assert report(
        "criterion 4a (supervised rate above model-free during first 5e3 iterations)",
        ok,
        f"seed-averaged rate ratios {rows}",
    )


def test_criterion_4b_final_rate_gap(modelfree_runs, supervised_runs):
    sup_final = np.mean([supervised_runs[s].final_record.avg_rate for s in SEEDS])
    mf_final = np.mean([modelfree_runs[s].final_record.avg_rate for s in SEEDS])
    ok = mf_final >= sup_final * 0.99
    assert report(
        "criterion 4b (final model-free rate >= supervised - 1%)",
        ok,
        f"model-free/supervised = {mf_final / sup_final:.4f} (>= 0.99)",
    )


# -- criterion 5: water-filling recovery -------------------------------------


def _waterfilling_deviation(model_free):
    env = PowerControlEnv(PowerControlConfig())
    target = env.model_free() if model_free else env
    # the power-control problem is not the paper-pinned case study; the slow
    # lr decay and near-constant exploration are this artifact's documented
    # settings for it (see README / ledger)
    if model_free:
        learner = make_deterministic_learner(
            target, seed=0, model_free=True, batch_size=32, lr_decay=1e-4,
            noise_sigma0=0.4, noise_decay=1e-5, value_hidden=(40, 40),
        )
        step, iters = modelfree_det_step, 250_000
    else:
        learner = make_deterministic_learner(target, seed=0, lr_decay=1e-4)
        step, iters = modelbased_det_step, ITERATIONS
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    for _ in range(iters):
        step(learner, target, rng)
    elapsed = time.perf_counter() - start
    gains = env.sample_status(np.random.default_rng(777), 10_000)
    p_net = forward(learner.policy_net, env.features(gains))[0][:, 0]
    p_wf = env.oracle_policy(gains)(gains)
    deviation = float(np.abs(p_net - p_wf).sum() / p_wf.sum())
    power_err = float(abs(p_net.mean() - env.budget) / env.budget)
    return deviation, power_err, elapsed


def test_criterion_5_water_filling_recovery():
    dev_mb, pow_mb, t_mb = _waterfilling_deviation(model_free=False)
    ok_mb = dev_mb <= 0.05 and pow_mb <= 0.02 and t_mb < 300
    assert report(
        "criterion 5 (model-based water-filling, <=5% deviation, power within 2%)",
        ok_mb,
        f"deviation {dev_mb:.4f}, power err {pow_mb:.4f}, {t_mb:.0f}s (< 300s)",
    )
    dev_mf, pow_mf, t_mf = _waterfilling_deviation(model_free=True)
    ok_mf = dev_mf <= 0.10 and pow_mf <= 0.02 and t_mf < 300
    assert report(
        "criterion 5 (model-free water-filling, <=10% deviation, power within 2%)",
        ok_mf,
        f"deviation {dev_mf:.4f}, power err {pow_mf:.4f}, {t_mf:.0f}s (< 300s)",
    )


# -- criterion 6: oracle integrity -------------------------------------------


def test_criterion_6_oracle_integrity():
    env = UserAssocEnv()
    rng = np.random.default_rng(31337)
    statuses = env.sample_status(rng, 10_000)
    assocs, rates = env.oracle_batch(statuses)
    all_assignments = [np.array(a) for a in itertools.product(range(env.num_bs), repeat=env.num_users)]
    worst_gap = 0.0
    for i in range(len(statuses)):
        assert (env.capacity_violation(assocs[i]) <= 0).all(), f"infeasible oracle at {i}"
        best = max(
            env.sum_rate(a, statuses[i])
            for a in all_assignments
            if (env.capacity_violation(a) <= 0).all()
        )
        worst_gap = max(worst_gap, abs(best - rates[i]) / best)
    pc = PowerControlEnv()
    gains = pc.sample_status(rng, 10_000)
    _, policy = waterfilling_oracle(gains, pc.budget, pc.noise)
    budget_gap = abs(policy(gains).mean() - pc.budget)
    ok = worst_gap < 1e-12 and budget_gap <= 1e-6 * pc.budget
    assert report(
        "criterion 6 (oracle integrity)",
        ok,
        f"1e4 statuses feasible+optimal (worst rel gap {worst_gap:.1e}); "
        f"water-filling budget gap {budget_gap:.2e} (<= 1e-6)",
    )


# -- criterion 7: determinism ------------------------------------------------


def test_criterion_7_byte_identical_csv(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps({"iterations": 2000, "eval_every": 500, "eval_samples": 200}))
    outs = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        assert cli_main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    assert report(
        "criterion 7 (byte-identical CSV on rerun)",
        ok,
        f"{len(outs[0])} bytes, identical={ok}",
    )
