"""Exact backprop vs finite differences.

The whole training stack rests on the hand-rolled reverse-mode gradients in
``pdlearn.nets``, so the first thing worth seeing is that they agree with
central finite differences for every head type: identity, ReLU, and the
grouped softmax used by factorized categorical policies.
"""

import numpy as np

from pdlearn.nets import MlpSpec, backward_input, backward_params, forward, init_mlp

EPS = 1e-5


def fd_scalar(mlp, x, g):
    out, _ = forward(mlp, x)
    return float((g * out).sum())


def fd_param_grad(mlp, x, g, arr, i):
    flat = arr.reshape(-1)
    orig = flat[i]
    flat[i] = orig + EPS
    hi = fd_scalar(mlp, x, g)
    flat[i] = orig - EPS
    lo = fd_scalar(mlp, x, g)
    flat[i] = orig
    return (hi - lo) / (2 * EPS)


rng = np.random.default_rng(7)
specs = [
    MlpSpec((4, 12, 3)),
    MlpSpec((4, 12, 3), output_activation="relu"),
    MlpSpec((6, 20, 20, 6), output_activation="grouped_softmax", group_size=2),
]

print(f"{'head':<18s} {'params':>7s} {'max rel err (params)':>22s} {'max rel err (input)':>21s}")
for spec in specs:
    mlp = init_mlp(spec, int(rng.integers(2**31)))
    x = rng.normal(size=spec.input_size)
    g = rng.normal(size=spec.output_size)
    _, trace = forward(mlp, x)
    analytic = backward_params(mlp, trace, g)

    worst = 0.0
    count = 0
    for arrs, ana in ((mlp.weights, analytic.weights), (mlp.biases, analytic.biases)):
        for arr, a in zip(arrs, ana):
            for i in range(arr.size):
                ref = fd_param_grad(mlp, x, g, arr, i)
                worst = max(worst, abs(a.reshape(-1)[i] - ref) / max(abs(ref), 1e-3))
                count += 1

    ana_in = backward_input(mlp, trace, g)
    worst_in = 0.0
    for i in range(x.size):
        x_pert = x.copy()
        x_pert[i] += EPS
        hi = fd_scalar(mlp, x_pert, g)
        x_pert[i] -= 2 * EPS
        lo = fd_scalar(mlp, x_pert, g)
        ref = (hi - lo) / (2 * EPS)
        worst_in = max(worst_in, abs(ana_in[i] - ref) / max(abs(ref), 1e-3))

    print(f"{spec.output_activation:<18s} {count:>7d} {worst:>22.3e} {worst_in:>21.3e}")

print("\nanything below 1e-4 means the chain rule (incl. the softmax Jacobian) is exact")
