"""Softmax-weighted rule layers with a fuzzy disjunction on top.

Each layer computes ``relu(softmax_rows(raw) @ x - d) / (1 - d)``. Because the
softmax rows sum to one, a node only switches on when nearly all of its
weight sits on inputs that are true, which is how a conjunction behaves.
The last layer's ``m`` nodes are OR-ed together with ``1 - prod(1 - y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .nn import softmax_rows, softmax_rows_backward


@dataclass
class RuleNetParams:
    raws: list  # raw weight matrices, layer i has shape (n_out, n_in)
    bias: float = 0.5

    def __post_init__(self):
        if not self.raws:
            raise InvalidArgument("rule network needs at least one layer")
        if not 0.0 < self.bias < 1.0:
            raise InvalidArgument("bias d must lie in (0, 1)")
        self.raws = [np.asarray(r, dtype=np.float64) for r in self.raws]
        for a, b in zip(self.raws, self.raws[1:]):
            if b.shape[1] != a.shape[0]:
                raise InvalidArgument(f"rule layers do not chain: {a.shape} then {b.shape}")

    @property
    def n_in(self) -> int:
        return self.raws[0].shape[1]

    @property
    def n_rules(self) -> int:
        return self.raws[-1].shape[0]

    def params(self, prefix: str = "rules") -> dict:
        return {f"{prefix}.{i}": r for i, r in enumerate(self.raws)}

    def copy(self) -> "RuleNetParams":
        return RuleNetParams([r.copy() for r in self.raws], self.bias)


def init_rulenet(n_in: int, widths, n_rules: int, rng, bias: float = 0.5,
                 peak: float = 0.9, noise: float = 0.1, inputs=None) -> RuleNetParams:
    """Random rule network whose rows each start focused on one input.

    A uniform softmax row over ``n`` fuzzy inputs averages to roughly
    ``1/K`` which sits below the bias, so every node would start dead.
    Each row instead puts weight ``peak`` on one column. If sample
    ``inputs`` are given (no labels needed) the column is drawn in
    proportion to how much it varies across them, layer by layer, so no
    row starts on an input that is constant (never or always on).
    """
    sizes = [n_in, *widths, n_rules]
    h = None if inputs is None else np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    raws = []
    for a, b in zip(sizes, sizes[1:]):
        raw = rng.normal(0.0, noise, size=(b, a))
        if a > 1:
            boost = np.log(peak * (a - 1) / (1.0 - peak))
            weight = None
            if h is not None:
                weight = h.var(axis=0)
                if weight.sum() <= 0:
                    weight = h.mean(axis=0)
            if weight is not None and weight.sum() > 0:
                cols = rng.choice(a, size=b, p=weight / weight.sum())
            else:
                cols = rng.integers(a, size=b)
            raw[np.arange(b), cols] += boost
        raws.append(raw)
        if h is not None:
            h = rule_layer(raw, h, bias)
    return RuleNetParams(raws, bias)


def rule_layer(raw, x, d: float = 0.5):
    raw = np.asarray(raw, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != raw.shape[1]:
        raise InvalidArgument(f"rule layer expects {raw.shape[1]} inputs, got {x.shape[-1]}")
    M = softmax_rows(raw)
    return np.maximum(x @ M.T - d, 0.0) / (1.0 - d)


def _exclusive_products(a):
    """``out[..., i] = prod_{j != i} a[..., j]`` without dividing."""
    ones = np.ones(a.shape[:-1] + (1,))
    prefix = np.cumprod(np.concatenate([ones, a[..., :-1]], axis=-1), axis=-1)
    suffix = np.cumprod(np.concatenate([ones, a[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return prefix * suffix


def fuzzy_or(v):
    v = np.asarray(v, dtype=np.float64)
    return 1.0 - np.prod(1.0 - v, axis=-1)


def fuzzy_or_backward(v, grad_out):
    return np.asarray(grad_out)[..., None] * _exclusive_products(1.0 - np.asarray(v))


def rulenet_forward(params: RuleNetParams, V):
    """``y_hat`` for a vector or ``(B, n)`` batch; returns ``(y_hat, cache)``."""
    V = np.asarray(V, dtype=np.float64)
    if V.shape[-1] != params.n_in:
        raise InvalidArgument(f"rule network expects {params.n_in} atoms, got {V.shape[-1]}")
    d = params.bias
    cache = []
    h = V
    for raw in params.raws:
        M = softmax_rows(raw)
        U = h @ M.T - d
        cache.append((M, h, U))
        h = np.maximum(U, 0.0) / (1.0 - d)
    cache.append(h)
    return fuzzy_or(h), cache


def rulenet_backward(params: RuleNetParams, cache, grad_out):
    """Gradients w.r.t. every raw matrix and the input vector(s).

    The rectifier's subgradient at exactly zero is taken as zero.
    """
    d = params.bias
    g = fuzzy_or_backward(cache[-1], grad_out)
    grads = [None] * len(params.raws)
    for i in range(len(params.raws) - 1, -1, -1):
        M, h, U = cache[i]
        gU = g * (U > 0.0) / (1.0 - d)
        gM = np.outer(gU, h) if gU.ndim == 1 else gU.T @ h
        grads[i] = softmax_rows_backward(M, gM)
        g = gU @ M
    return grads, g


def program_tensor(params: RuleNetParams):
    """``M_k @ ... @ M_1``: row ``r`` is rule ``r``'s weight over the input atoms."""
    out = softmax_rows(params.raws[0])
    for raw in params.raws[1:]:
        out = softmax_rows(raw) @ out
    return out
