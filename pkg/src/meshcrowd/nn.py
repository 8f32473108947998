"""Tiny parameter-module layer shared by the attention stack and the model.

Modules hold named parameter tensors and child modules; parameter order
is insertion order, so names and layout are stable across runs with the
same config (the checkpoint format relies on this).
"""

from __future__ import annotations

import math

import numpy as np

from . import ndgrad as nd
from .ndgrad import Tensor
from .rng import SplitMix64


class Module:
    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Module] = {}

    def param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for name, t in self._params.items():
            out[prefix + name] = t
        for name, child in self._children.items():
            out.update(child.named_parameters(prefix + name + "."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())


def _normal(rng: SplitMix64, shape: tuple[int, ...], std: float) -> np.ndarray:
    flat = np.array(rng.gausses(int(np.prod(shape))), dtype=np.float64)
    return std * flat.reshape(shape)


class Linear(Module):
    """y = x @ W + b for 2-D inputs (rows are items)."""

    def __init__(self, rng: SplitMix64, d_in: int, d_out: int,
                 zero_init: bool = False, bias_init: np.ndarray | None = None):
        super().__init__()
        std = 0.0 if zero_init else 1.0 / math.sqrt(d_in)
        self.weight = self.param("weight", _normal(rng, (d_in, d_out), std))
        b = np.zeros(d_out) if bias_init is None else np.asarray(bias_init, dtype=np.float64)
        self.bias = self.param("bias", b)
        self.d_in, self.d_out = d_in, d_out

    def __call__(self, x: Tensor) -> Tensor:
        y = x @ self.weight
        b = nd.broadcast_to(self.bias.reshape(1, self.d_out), y.shape)
        return y + b


class LayerNorm(Module):
    """Normalize over the last axis of a 2-D input, learned scale/shift."""

    def __init__(self, width: int, eps: float = 1e-6):
        super().__init__()
        self.scale = self.param("scale", np.ones(width))
        self.shift = self.param("shift", np.zeros(width))
        self.width = width
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - nd.broadcast_to(mu, x.shape)
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv = 1.0 / nd.tsqrt(var + self.eps)
        y = centered * nd.broadcast_to(inv, x.shape)
        g = nd.broadcast_to(self.scale.reshape(1, self.width), x.shape)
        b = nd.broadcast_to(self.shift.reshape(1, self.width), x.shape)
        return y * g + b


class MLP(Module):
    """Two-layer feed-forward block with tanh in the middle."""

    def __init__(self, rng: SplitMix64, d_in: int, d_hidden: int, d_out: int):
        super().__init__()
        self.fc1 = self.child("fc1", Linear(rng, d_in, d_hidden))
        self.fc2 = self.child("fc2", Linear(rng, d_hidden, d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(nd.tanh(self.fc1(x)))
