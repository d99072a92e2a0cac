"""Minimal fully-connected networks with exact reverse-mode gradients.

Everything is float64 numpy. A network is a plain value (no hidden state);
``forward`` is pure and caches what the two backward passes need, and
``sgd_step`` is the only mutator. Hidden layers are tanh; the output layer is
identity, ReLU, or a grouped softmax (independent softmax over fixed-size
groups of the output vector, used for factorized categorical policies).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OUTPUT_ACTIVATIONS = ("identity", "relu", "grouped_softmax")

# any |parameter| beyond this is treated as a diverged run
PARAM_ABS_LIMIT = 1e6


class DivergenceError(RuntimeError):
    """Training state stopped being finite (or blew past the size guard)."""


@dataclass(frozen=True)
class MlpSpec:
    """Shape and activation description of one network.

    ``layer_sizes`` lists input, hidden..., output widths. ``group_size`` is
    only meaningful for the grouped-softmax output and must divide the output
    width.
    """

    layer_sizes: tuple
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    group_size: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least input and output")
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer_sizes must be positive, got {sizes}")
        if self.hidden_activation != "tanh":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if self.output_activation == "grouped_softmax":
            if self.group_size <= 0 or sizes[-1] % self.group_size != 0:
                raise ValueError(
                    f"group_size {self.group_size} must divide output size {sizes[-1]}"
                )

    @property
    def input_size(self):
        return self.layer_sizes[0]

    @property
    def output_size(self):
        return self.layer_sizes[-1]

    @property
    def num_layers(self):
        return len(self.layer_sizes) - 1


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list  # per layer, shape (fan_out, fan_in)
    biases: list  # per layer, shape (fan_out,)


@dataclass
class MlpGrads:
    weights: list
    biases: list


@dataclass
class ForwardTrace:
    """Per-layer values cached by ``forward`` for the backward passes."""

    inputs: np.ndarray  # (n, d_in)
    pre_activations: list  # per layer (n, d_l)
    activations: list  # per layer, post-activation
    squeeze: bool  # caller passed a single vector


def init_mlp(spec: MlpSpec, seed: int) -> Mlp:
    """Fresh network: weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases 0."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec, weights, biases)


def clone_mlp(mlp: Mlp) -> Mlp:
    return Mlp(mlp.spec, [w.copy() for w in mlp.weights], [b.copy() for b in mlp.biases])


def num_params(mlp: Mlp) -> int:
    return sum(w.size for w in mlp.weights) + sum(b.size for b in mlp.biases)


def lr_schedule(base: float, decay: float, t: int) -> float:
    """Decaying learning rate base / (1 + decay * t)."""
    if t < 0:
        raise ValueError("iteration index must be >= 0")
    return base / (1.0 + decay * t)


def _grouped_softmax(z, group_size):
    """Row-wise softmax over consecutive groups, max-subtracted for safety."""
    n, d = z.shape
    zg = z.reshape(n, d // group_size, group_size)
    e = np.exp(zg - zg.max(axis=-1, keepdims=True))
    return (e / e.sum(axis=-1, keepdims=True)).reshape(n, d)


def _grouped_softmax_vjp(s, grad, group_size):
    """Pull ``grad`` (w.r.t. softmax outputs s) back to the logits."""
    n, d = s.shape
    sg = s.reshape(n, d // group_size, group_size)
    gg = grad.reshape(n, d // group_size, group_size)
    dot = (sg * gg).sum(axis=-1, keepdims=True)
    return (sg * (gg - dot)).reshape(n, d)


def _apply_output(z, spec):
    if spec.output_activation == "identity":
        return z
    if spec.output_activation == "relu":
        return np.maximum(z, 0.0)
    return _grouped_softmax(z, spec.group_size)


def _output_vjp(z, a, grad, spec):
    if spec.output_activation == "identity":
        return grad
    if spec.output_activation == "relu":
        return grad * (z > 0.0)
    return _grouped_softmax_vjp(a, grad, spec.group_size)


def forward(mlp: Mlp, x) -> tuple:
    """Forward pass; returns (output, trace).

    ``x`` may be one input vector or a batch of row vectors; the output and
    the cached trace follow the same shape convention.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    X = x[None, :] if squeeze else x
    if X.shape[1] != mlp.spec.input_size:
        raise ValueError(f"input width {X.shape[1]} != spec {mlp.spec.input_size}")
    pre, acts = [], []
    a = X
    last = mlp.spec.num_layers - 1
    for i, (W, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ W.T + b
        pre.append(z)
        a = np.tanh(z) if i < last else _apply_output(z, mlp.spec)
        acts.append(a)
    out = acts[-1][0] if squeeze else acts[-1]
    return out, ForwardTrace(X, pre, acts, squeeze)


def _backprop(mlp, trace, output_grad, want_input):
    G = np.asarray(output_grad, dtype=float)
    if trace.squeeze:
        G = G[None, :]
    if G.shape != trace.activations[-1].shape:
        raise ValueError(
            f"output_grad shape {G.shape} != output shape {trace.activations[-1].shape}"
        )
    delta = _output_vjp(trace.pre_activations[-1], trace.activations[-1], G, mlp.spec)
    dws = [None] * mlp.spec.num_layers
    dbs = [None] * mlp.spec.num_layers
    dx = None
    for l in range(mlp.spec.num_layers - 1, -1, -1):
        a_prev = trace.activations[l - 1] if l > 0 else trace.inputs
        dws[l] = delta.T @ a_prev
        dbs[l] = delta.sum(axis=0)
        if l > 0:
            # tanh'(z) = 1 - tanh(z)^2, from the cached activation
            delta = (delta @ mlp.weights[l]) * (1.0 - a_prev**2)
        elif want_input:
            dx = delta @ mlp.weights[0]
    return MlpGrads(dws, dbs), dx


def backward_params(mlp: Mlp, trace: ForwardTrace, output_grad) -> MlpGrads:
    """Gradient of sum(output_grad * output) w.r.t. every weight and bias."""
    grads, _ = _backprop(mlp, trace, output_grad, want_input=False)
    return grads


def backward_input(mlp: Mlp, trace: ForwardTrace, output_grad) -> np.ndarray:
    """Gradient of sum(output_grad * output) w.r.t. the network input."""
    _, dx = _backprop(mlp, trace, output_grad, want_input=True)
    return dx[0] if trace.squeeze else dx


def sgd_step(mlp: Mlp, grads: MlpGrads, lr: float, direction: str = "descent") -> Mlp:
    """In-place SGD update along +/- lr * grad; returns the same network.

    Raises DivergenceError on non-finite gradients or once any parameter
    leaves [-PARAM_ABS_LIMIT, PARAM_ABS_LIMIT].
    """
    if direction == "ascent":
        sign = 1.0
    elif direction == "descent":
        sign = -1.0
    else:
        raise ValueError(f"direction must be 'ascent' or 'descent', got {direction!r}")
    for dw, db in zip(grads.weights, grads.biases):
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            raise DivergenceError("non-finite gradient in sgd_step")
    for W, b, dw, db in zip(mlp.weights, mlp.biases, grads.weights, grads.biases):
        W += sign * lr * dw
        b += sign * lr * db
        if np.abs(W).max() > PARAM_ABS_LIMIT or (b.size and np.abs(b).max() > PARAM_ABS_LIMIT):
            raise DivergenceError(f"parameter magnitude exceeded {PARAM_ABS_LIMIT:g}")
    return mlp
