"""Primal-dual learners: stochastic-policy, deterministic model-based and
deterministic model-free, plus the supervised baseline and policy evaluation.

All three primal-dual variants seek the saddle point of
L = E[J_scaled] - lambda(h).g(h,x) - mu.E[c(h,x)]: policy parameters ascend,
multipliers descend. One call to a *_step function consumes one fresh batch
of statuses and performs one SGD update per network, all on the shared
iteration counter ``learner.t`` and the 1/(1+decay*t) learning-rate schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import (
    DivergenceError,
    Mlp,
    MlpSpec,
    backward_input,
    backward_params,
    forward,
    init_mlp,
    lr_schedule,
    sgd_step,
)

BASELINE_MODES = ("lagrangian", "objective", "none")


@dataclass
class StepMetrics:
    """Per-iteration training-batch summary returned by every *_step."""

    objective_mean: float
    violation_frac: float
    lagrangian_mean: float
    multiplier_norm: float
    value_loss: float = float("nan")
    cross_entropy: float = float("nan")


@dataclass(frozen=True)
class LagrangianSample:
    """One observed (objective, constraints, multipliers) tuple and its L.

    The canonical per-sample record behind the primal-dual updates; the
    training steps carry the same quantities as batched arrays for speed,
    while the enumeration/verification paths build these explicitly.
    """

    objective: float
    constraints: np.ndarray
    multipliers: np.ndarray
    lagrangian: float

    @classmethod
    def from_parts(cls, objective, constraints, multipliers, objective_scale=1.0):
        g = np.asarray(constraints, dtype=float)
        lam = np.asarray(multipliers, dtype=float)
        lagrangian = objective / objective_scale - float(lam @ g)
        if not np.isfinite(lagrangian):
            raise DivergenceError("non-finite Lagrangian sample")
        return cls(float(objective), g, lam, lagrangian)


def _seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


# ---------------------------------------------------------------------------
# stochastic policy (discrete actions, score-function gradient with baseline)
# ---------------------------------------------------------------------------


@dataclass
class StochasticLearner:
    policy_net: Mlp  # h-features -> K groups of B association probabilities
    multiplier_net: Mlp  # h-features -> B nonnegative multipliers
    value_net: Mlp  # h-features -> action-averaged (J_scaled, g_1..g_B)
    num_users: int
    num_bs: int
    objective_scale: float
    lr_base: float = 0.01
    lr_decay: float = 0.001
    batch_size: int = 16
    baseline: str = "lagrangian"
    t: int = 0


def make_stochastic_learner(
    env,
    hidden=(20, 20),
    seed=0,
    batch_size=16,
    lr_base=0.01,
    lr_decay=0.001,
    baseline="lagrangian",
) -> StochasticLearner:
    if baseline not in BASELINE_MODES:
        raise ValueError(f"baseline must be one of {BASELINE_MODES}")
    K, B, fdim = env.num_users, env.num_bs, env.feature_dim
    s_pol, s_mul, s_val = _seeds(seed, 3)
    policy = init_mlp(
        MlpSpec((fdim, *hidden, K * B), output_activation="grouped_softmax", group_size=B),
        s_pol,
    )
    multiplier = init_mlp(MlpSpec((fdim, *hidden, B), output_activation="relu"), s_mul)
    # start the multipliers strictly positive; equal per-BS values are
    # policy-neutral (sum_b g_b is action-independent) and the dual reaches
    # its operating range sooner
    multiplier.biases[-1][:] = 1.0
    value = init_mlp(MlpSpec((fdim, *hidden, 1 + B), output_activation="relu"), s_val)
    return StochasticLearner(
        policy, multiplier, value, K, B, env.objective_scale,
        lr_base, lr_decay, batch_size, baseline,
    )


def _preactivation_view(net: Mlp) -> Mlp:
    """Identity-output alias of ``net`` sharing its parameter arrays.

    Used for the multiplier updates: stepping the pre-activations and letting
    the ReLU act as a projection keeps zero *reflective* (a violation can
    always revive a silent multiplier), exactly like the max(0, mu + lr*c)
    update of the scalar multipliers. Backpropagating through the ReLU
    instead would make the dead zone absorbing: once every status maps below
    zero the multiplier gradient vanishes for good, and the average
    constraint slack (sum_b g_b = K - B*N < 0) drives it there early.
    """
    return Mlp(MlpSpec(net.spec.layer_sizes), net.weights, net.biases)


def sample_grouped(probs, group_size, rng):
    """Inverse-CDF draw from each softmax group; probs rows are (K*group_size,)."""
    n, d = probs.shape
    cum = probs.reshape(n, d // group_size, group_size).cumsum(axis=-1)
    idx = (rng.random((n, d // group_size, 1)) > cum).sum(axis=-1)
    return np.minimum(idx, group_size - 1)


def policy_score_output_grad(probs, actions, coeff, group_size):
    """d/d(probs) of sum_i coeff_i * log pi(actions_i | h_i).

    This is the score-function estimator's output gradient: coeff_i / pi at
    the selected entry of every group, zero elsewhere. Pushing it through
    backward_params (which applies the softmax Jacobian) yields
    coeff * d(log pi)/d(theta).
    """
    G = np.zeros_like(probs)
    n, d = probs.shape
    rows = np.arange(n)[:, None]
    cols = np.arange(d // group_size)[None, :] * group_size + actions
    G[rows, cols] = np.asarray(coeff, dtype=float)[:, None] / probs[rows, cols]
    return G


def stochastic_step(learner: StochasticLearner, env, rng) -> StepMetrics:
    """One primal-dual iteration of the stochastic-policy learner.

    Draw order on ``rng``: batch of statuses, then one categorical draw per
    user per sample. ``env`` only needs the observation interface.
    """
    n = learner.batch_size
    lr = lr_schedule(learner.lr_base, learner.lr_decay, learner.t)
    H = env.sample_status(rng, n)
    F = env.features(H)
    probs, p_trace = forward(learner.policy_net, F)
    X = sample_grouped(probs, learner.num_bs, rng)
    J, G, _ = env.observe_batch(H, X)
    J_scaled = J / learner.objective_scale
    mult_view = _preactivation_view(learner.multiplier_net)
    z, m_trace = forward(mult_view, F)
    lam = np.maximum(z, 0.0)
    L = J_scaled - (lam * G).sum(axis=1)
    if not np.isfinite(L).all():
        raise DivergenceError("non-finite Lagrangian sample")

    # value net: one L2-regression descent step toward the observed values
    V, v_trace = forward(learner.value_net, F)
    targets = np.concatenate([J_scaled[:, None], G], axis=1)
    resid = V - targets
    sgd_step(
        learner.value_net,
        backward_params(learner.value_net, v_trace, resid / n),
        lr,
        "descent",
    )

    if learner.baseline == "lagrangian":
        base = V[:, 0] - (lam * V[:, 1:]).sum(axis=1)
    elif learner.baseline == "objective":
        base = V[:, 0]
    else:
        base = np.zeros(n)

    # policy ascent on the baselined score-function gradient
    adv = L - base
    sgd_step(
        learner.policy_net,
        backward_params(
            learner.policy_net,
            p_trace,
            policy_score_output_grad(probs, X, adv / n, learner.num_bs),
        ),
        lr,
        "ascent",
    )
    # multiplier step along +sum_b g_b grad z_b: the descent direction of L
    # in the multiplier parameters (dL/dlambda_b = -g_b), applied to the
    # pre-activations with the ReLU acting as the projection onto lambda >= 0.
    # Like max(0, mu + lr*c) for the scalar multipliers, the projection is a
    # reflecting barrier: a satisfied constraint stops pushing once its
    # multiplier sits at zero, while a violation always pushes back up.
    dual_push = G * ((z > 0.0) | (G > 0.0))
    sgd_step(
        mult_view,
        backward_params(mult_view, m_trace, dual_push / n),
        lr,
        "ascent",
    )
    learner.t += 1
    return StepMetrics(
        objective_mean=float(J.mean()),
        violation_frac=float((G > 0).any(axis=1).mean()),
        lagrangian_mean=float(L.mean()),
        multiplier_norm=float(np.sqrt((lam**2).sum(axis=1)).mean()),
        value_loss=float(0.5 * (resid**2).sum(axis=1).mean()),
    )


# ---------------------------------------------------------------------------
# deterministic policy (continuous actions)
# ---------------------------------------------------------------------------


class MlpValueModel:
    """L2-regression approximator of one scalar observed value over (x, h)."""

    def __init__(self, net: Mlp):
        self.net = net

    def fit_step(self, inputs, targets, lr) -> float:
        v, trace = forward(self.net, inputs)
        resid = v[:, 0] - targets
        grads = backward_params(self.net, trace, (resid / len(targets))[:, None])
        sgd_step(self.net, grads, lr, "descent")
        return float(0.5 * (resid**2).mean())

    def action_grad(self, inputs) -> np.ndarray:
        """d(value)/d(action) per row; the action is the first input column."""
        v, trace = forward(self.net, inputs)
        return backward_input(self.net, trace, np.ones_like(v))[:, 0]


@dataclass
class DeterministicLearner:
    policy_net: Mlp  # h-features -> nonnegative action
    value_models: list | None  # [objective, avg-constraint...]; None = model-based
    avg_multipliers: np.ndarray  # scalar multipliers, one per average constraint
    objective_scale: float = 1.0
    lr_base: float = 0.01
    lr_decay: float = 0.001
    batch_size: int = 16
    noise_sigma0: float = 0.0
    noise_decay: float = 0.001
    t: int = 0


def noise_sigma(learner: DeterministicLearner, t: int) -> float:
    """Diminishing exploration scale sigma0 / (1 + decay * t)."""
    return learner.noise_sigma0 / (1.0 + learner.noise_decay * t)


def make_deterministic_learner(
    env,
    hidden=(20, 20),
    seed=0,
    batch_size=16,
    lr_base=0.01,
    lr_decay=0.001,
    model_free=False,
    noise_sigma0=None,
    noise_decay=0.001,
    value_hidden=None,
) -> DeterministicLearner:
    fdim = env.feature_dim
    seeds = _seeds(seed, 2 + env.num_avg_constraints)
    policy = init_mlp(MlpSpec((fdim, *hidden, 1), output_activation="relu"), seeds[0])
    # start at the budget power level so the ReLU output is live everywhere
    policy.biases[-1][:] = env.budget
    value_models = None
    if model_free:
        value_hidden = hidden if value_hidden is None else value_hidden
        value_models = [
            MlpValueModel(init_mlp(MlpSpec((1 + fdim, *value_hidden, 1)), s))
            for s in seeds[1 : 2 + env.num_avg_constraints]
        ]
    if noise_sigma0 is None:
        noise_sigma0 = 0.1 * env.action_high
    return DeterministicLearner(
        policy_net=policy,
        value_models=value_models,
        avg_multipliers=np.zeros(env.num_avg_constraints),
        objective_scale=env.objective_scale,
        lr_base=lr_base,
        lr_decay=lr_decay,
        batch_size=batch_size,
        noise_sigma0=noise_sigma0,
        noise_decay=noise_decay,
    )


def _det_metrics(learner, J, C, mu):
    lagr = J / learner.objective_scale - C @ mu
    return (
        float(J.mean()),
        float(lagr.mean()),
        float(np.sqrt((mu**2).sum())),
    )


def modelbased_det_step(learner: DeterministicLearner, env, rng) -> StepMetrics:
    """Primal-dual step with exact objective/constraint gradients from ``env``."""
    n = learner.batch_size
    lr = lr_schedule(learner.lr_base, learner.lr_decay, learner.t)
    H = env.sample_status(rng, n)
    P, trace = forward(learner.policy_net, env.features(H))
    p = P[:, 0]
    djdp, _, dcdp = env.analytic_gradients(H, p)
    mu = learner.avg_multipliers
    scale = djdp / learner.objective_scale - mu @ dcdp
    sgd_step(
        learner.policy_net,
        backward_params(learner.policy_net, trace, (scale / n)[:, None]),
        lr,
        "ascent",
    )
    J, _, C = env.observe_batch(H, p)
    obj, lagr, mun = _det_metrics(learner, J, C, mu)
    learner.avg_multipliers = np.maximum(0.0, mu + lr * C.mean(axis=0))
    learner.t += 1
    return StepMetrics(obj, 0.0, lagr, mun)


def modelfree_det_step(learner: DeterministicLearner, env, rng) -> StepMetrics:
    """Primal-dual step relying on value models instead of the analytic model.

    Draw order on ``rng``: batch of statuses, then the exploration noise.
    The value models regress on the executed (noisy) action; the policy
    gradient chains their action-derivatives evaluated at the clean action.
    """
    if learner.value_models is None:
        raise ValueError("model-free step requires value models")
    n = learner.batch_size
    lr = lr_schedule(learner.lr_base, learner.lr_decay, learner.t)
    sigma = noise_sigma(learner, learner.t)
    H = env.sample_status(rng, n)
    F = env.features(H)
    P, trace = forward(learner.policy_net, F)
    p_clean = P[:, 0]
    p_exec = np.maximum(0.0, p_clean + sigma * rng.standard_normal(n))
    J, _, C = env.observe_batch(H, p_exec)
    if not (np.isfinite(J).all() and np.isfinite(C).all()):
        raise DivergenceError("non-finite observation")

    targets = [J / learner.objective_scale] + [C[:, j] for j in range(C.shape[1])]
    exec_in = np.concatenate([p_exec[:, None], F], axis=1)
    vloss = sum(vm.fit_step(exec_in, y, lr) for vm, y in zip(learner.value_models, targets))

    clean_in = np.concatenate([p_clean[:, None], F], axis=1)
    scale = learner.value_models[0].action_grad(clean_in)
    for j, mu_j in enumerate(learner.avg_multipliers):
        scale = scale - mu_j * learner.value_models[1 + j].action_grad(clean_in)
    sgd_step(
        learner.policy_net,
        backward_params(learner.policy_net, trace, (scale / n)[:, None]),
        lr,
        "ascent",
    )
    mu = learner.avg_multipliers
    obj, lagr, mun = _det_metrics(learner, J, C, mu)
    learner.avg_multipliers = np.maximum(0.0, mu + lr * C.mean(axis=0))
    learner.t += 1
    return StepMetrics(obj, 0.0, lagr, mun, value_loss=float(vloss))


# ---------------------------------------------------------------------------
# supervised baseline (cross-entropy on exhaustive-search labels)
# ---------------------------------------------------------------------------


@dataclass
class SupervisedLearner:
    policy_net: Mlp
    num_users: int
    num_bs: int
    lr_base: float = 0.01
    lr_decay: float = 0.001
    batch_size: int = 16
    t: int = 0


def make_supervised_learner(
    env, hidden=(20, 20), seed=0, batch_size=16, lr_base=0.01, lr_decay=0.001
) -> SupervisedLearner:
    K, B = env.num_users, env.num_bs
    policy = init_mlp(
        MlpSpec(
            (env.feature_dim, *hidden, K * B),
            output_activation="grouped_softmax",
            group_size=B,
        ),
        _seeds(seed, 1)[0],
    )
    return SupervisedLearner(policy, K, B, lr_base, lr_decay, batch_size)


def supervised_step(learner: SupervisedLearner, env, oracle, rng) -> StepMetrics:
    """Cross-entropy descent toward ``oracle``'s labels on one fresh batch.

    ``oracle`` maps a status batch to label associations (n, K). Draw order
    on ``rng``: statuses, then one categorical draw per user (metrics only).
    """
    n = learner.batch_size
    lr = lr_schedule(learner.lr_base, learner.lr_decay, learner.t)
    H = env.sample_status(rng, n)
    labels = np.asarray(oracle(H))
    probs, trace = forward(learner.policy_net, env.features(H))
    rows = np.arange(n)[:, None]
    cols = np.arange(learner.num_users)[None, :] * learner.num_bs + labels
    picked = probs[rows, cols]
    ce = float(-np.log(picked).sum(axis=1).mean())
    G = np.zeros_like(probs)
    G[rows, cols] = -1.0 / (n * picked)
    sgd_step(learner.policy_net, backward_params(learner.policy_net, trace, G), lr, "descent")

    X = sample_grouped(probs, learner.num_bs, rng)
    J, Gv, _ = env.observe_batch(H, X)
    learner.t += 1
    return StepMetrics(
        objective_mean=float(J.mean()),
        violation_frac=float((Gv > 0).any(axis=1).mean()),
        lagrangian_mean=0.0,
        multiplier_norm=0.0,
        cross_entropy=ce,
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def policy_actions(policy, env, H, mode, rng):
    """Actions of ``policy`` on a status batch.

    ``policy`` is a learner with a grouped-softmax ``policy_net``, a bare
    such Mlp, or a callable mapping the status batch to actions.
    """
    net = getattr(policy, "policy_net", policy if isinstance(policy, Mlp) else None)
    if net is None:
        return policy(H)
    probs, _ = forward(net, env.features(H))
    if mode == "sample":
        return sample_grouped(probs, net.spec.group_size, rng)
    if mode == "argmax":
        n, d = probs.shape
        g = net.spec.group_size
        return probs.reshape(n, d // g, g).argmax(axis=-1)
    raise ValueError(f"mode must be 'sample' or 'argmax', got {mode!r}")


def evaluate_policy(policy, env, n_samples, mode="sample", rng=None):
    """Monte-Carlo (mean objective, violation probability) on fresh statuses.

    The violation probability is the fraction of statuses where any
    instantaneous constraint is strictly positive.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    H = env.sample_status(rng, n_samples)
    X = policy_actions(policy, env, H, mode, rng)
    J, G, _ = env.observe_batch(H, X)
    violation = float((G > 0).any(axis=1).mean()) if G.shape[1] else 0.0
    return float(J.mean()), violation
