"""Dense-layer substrate: forward/backward passes, losses and Adam.

Everything runs on float64 numpy arrays. Layers store weights as
``(out, in)`` so a batch ``x`` of shape ``(N, in)`` maps to ``x @ W.T + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, TrainingDiverged

ACTIVATIONS = ("linear", "relu", "sigmoid")
LOSSES = ("mse", "bce")
BCE_CLAMP = 1e-7


def softmax_rows(raw):
    """Row-wise softmax with a per-row max shift."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise InvalidArgument("softmax_rows: input contains non-finite values")
    shifted = raw - raw.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_backward(probs, grad_probs):
    """Gradient w.r.t. the raw logits given the gradient w.r.t. ``probs``."""
    inner = np.sum(grad_probs * probs, axis=-1, keepdims=True)
    return probs * (grad_probs - inner)


@dataclass
class Dense:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise InvalidArgument(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise InvalidArgument(
                f"layer shapes disagree: weight {self.weight.shape}, bias {self.bias.shape}"
            )

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


class DenseNet:
    """A chain of :class:`Dense` layers."""

    def __init__(self, layers):
        self.layers = list(layers)
        if not self.layers:
            raise InvalidArgument("DenseNet needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise InvalidArgument(f"layer sizes do not chain: {a.n_out} -> {b.n_in}")

    @classmethod
    def init(cls, sizes, activations, rng):
        """Glorot-uniform weights, zero biases."""
        if len(activations) != len(sizes) - 1:
            raise InvalidArgument("need one activation per layer")
        layers = []
        for n_in, n_out, act in zip(sizes, sizes[1:], activations):
            limit = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-limit, limit, size=(n_out, n_in))
            layers.append(Dense(w, np.zeros(n_out), act))
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def params(self, prefix: str) -> dict:
        """Parameter arrays keyed by name; the arrays are live, not copies."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}.{i}.weight"] = layer.weight
            out[f"{prefix}.{i}.bias"] = layer.bias
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            Dense(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers
        )

    def __call__(self, x):
        return net_forward(self, x)[-1][1]


def _activate(kind, pre):
    if kind == "linear":
        return pre
    if kind == "relu":
        return np.maximum(pre, 0.0)
    return 0.5 * (1.0 + np.tanh(0.5 * pre))


def _activation_grad(kind, pre, post):
    if kind == "linear":
        return np.ones_like(pre)
    if kind == "relu":
        return (pre > 0.0).astype(np.float64)
    return post * (1.0 - post)


def net_forward(net: DenseNet, x):
    """Run ``x`` (vector or ``(N, in)`` batch) through ``net``.

    Returns a list of ``(pre, post)`` pairs, one per layer, preceded by
    ``(x, x)`` for the input.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_in:
        raise InvalidArgument(f"input size {x.shape[-1]} != network input {net.n_in}")
    acts = [(x, x)]
    h = x
    for layer in net.layers:
        pre = h @ layer.weight.T + layer.bias
        h = _activate(layer.activation, pre)
        acts.append((pre, h))
    return acts


def net_backward(net: DenseNet, acts, upstream):
    """Backpropagate ``upstream`` (dL/d output) through ``net``.

    Returns ``(grads, grad_input)`` where ``grads`` is a list of
    ``(grad_weight, grad_bias)`` per layer. For batched activations the
    parameter gradients are summed over the batch.
    """
    if len(acts) != len(net.layers) + 1:
        raise InvalidArgument("activations do not come from this network")
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != acts[-1][1].shape:
        raise InvalidArgument(f"upstream shape {g.shape} != output shape {acts[-1][1].shape}")
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        pre, post = acts[i + 1]
        g = g * _activation_grad(layer.activation, pre, post)
        x_in = acts[i][1]
        if g.ndim == 1:
            gw = np.outer(g, x_in)
            gb = g.copy()
        else:
            gw = g.T @ x_in
            gb = g.sum(axis=0)
        grads[i] = (gw, gb)
        g = g @ layer.weight
    return grads, g


def net_grad_dict(net: DenseNet, grads, prefix: str) -> dict:
    out = {}
    for i, (gw, gb) in enumerate(grads):
        out[f"{prefix}.{i}.weight"] = gw
        out[f"{prefix}.{i}.bias"] = gb
    return out


def loss_eval(kind: str, pred, target):
    """Mean loss over entries and its gradient w.r.t. ``pred``.

    The BCE clamp is treated as identity in the backward pass so a
    saturated prediction still receives a gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidArgument(f"loss: shape {pred.shape} != {target.shape}")
    n = pred.size
    if kind == "mse":
        diff = pred - target
        return float(np.sum(diff * diff) / n), 2.0 * diff / n
    if kind == "bce":
        p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
        value = -np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)) / n
        grad = (p - target) / (p * (1.0 - p)) / n
        return float(value), grad
    raise InvalidArgument(f"unknown loss {kind!r}")


@dataclass
class OptimizerState:
    """Adam moments and hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    param_lr: dict = field(default_factory=dict)  # per-parameter overrides of lr


def optimizer_step(params: dict, grads: dict, state: OptimizerState) -> dict:
    """One Adam update, applied in place to ``params``.

    Parameters without an entry in ``grads`` are left alone. All gradients
    are checked before anything is modified.
    """
    for name, g in grads.items():
        if name not in params:
            raise InvalidArgument(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise InvalidArgument(f"gradient shape mismatch for {name!r}")
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient for {name!r}", parameter=name)
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        p = params[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.param_lr.get(name, state.lr) * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
