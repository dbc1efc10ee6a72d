"""Layers and parameter containers built on the autodiff core.

Weight matrices use Xavier-uniform initialization and zero biases. Modules
track their training flag explicitly because dropout and batch-norm behave
differently at fit and predict time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    ConfigError,
    Tensor,
    concat,
    matmul,
    mean,
    relu,
    scaled_dot_attention,
    sqrt,
)

__all__ = [
    "Module",
    "Linear",
    "BatchNorm1d",
    "LayerNorm",
    "MultiHeadAttention",
    "FeedForward",
    "EncoderBlock",
    "DropoutSpec",
]


@dataclass(frozen=True)
class DropoutSpec:
    """Dropout rates applied at the input and penultimate layers."""

    input_rate: float = 0.0
    penultimate_rate: float = 0.0

    def __post_init__(self):
        for r in (self.input_rate, self.penultimate_rate):
            if not 0.0 <= r <= 1.0:
                raise ConfigError(f"dropout rate {r} outside [0, 1]")


class Module:
    """Base class: recursive parameter/buffer discovery and train/eval mode."""

    def __init__(self):
        self.training = True

    def _children(self):
        for key, value in vars(self).items():
            if isinstance(value, Module):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{key}.{i}", item

    def named_parameters(self, prefix: str = ""):
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield (prefix + key, value)
        for key, child in self._children():
            yield from child.named_parameters(prefix + key + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        """Non-trainable state (running statistics) that must persist."""
        for key, value in vars(self).items():
            if isinstance(value, np.ndarray):
                yield (prefix + key, value)
        for key, child in self._children():
            yield from child.named_buffers(prefix + key + ".")

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {name: p.data for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            out["buffer." + name] = buf
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]):
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        for name, value in arrays.items():
            if name.startswith("buffer."):
                target = buffers[name[len("buffer.") :]]
                target[...] = value
            else:
                p = params[name]
                if p.data.shape != value.shape:
                    raise ConfigError(
                        f"parameter {name}: stored shape {value.shape} "
                        f"does not match model shape {p.data.shape}"
                    )
                p.data = np.array(value, dtype=np.float64)

    def set_training(self, flag: bool):
        self.training = flag
        for _, child in self._children():
            child.set_training(flag)
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    """Affine map x @ W + b with Xavier-uniform W and zero b."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        limit = math.sqrt(6.0 / (in_features + out_features))
        self.weight = Tensor(
            rng.uniform(-limit, limit, size=(in_features, out_features)),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class BatchNorm1d(Module):
    """Batch normalization over axis 0 with running statistics for eval."""

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gamma = Tensor(np.ones(num_features), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features), requires_grad=True)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        if self.training:
            mu = mean(x, axis=0, keepdims=True)
            centered = x - mu
            var = mean(centered * centered, axis=0, keepdims=True)
            self.running_mean += self.momentum * (
                mu.data.ravel() - self.running_mean
            )
            self.running_var += self.momentum * (var.data.ravel() - self.running_var)
            xhat = centered / sqrt(var + self.eps)
        else:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return xhat * self.gamma + self.beta


class LayerNorm(Module):
    """Normalization over the last axis, per row."""

    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = mean(x, axis=-1, keepdims=True)
        centered = x - mu
        var = mean(centered * centered, axis=-1, keepdims=True)
        return centered / sqrt(var + self.eps) * self.gamma + self.beta


class MultiHeadAttention(Module):
    """Learned-projection multi-head attention over an external memory."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        super().__init__()
        if dim % heads != 0:
            raise ConfigError(f"embedding dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)

    def __call__(self, query: Tensor, keys: Tensor, values: Tensor) -> Tensor:
        attended = scaled_dot_attention(
            self.wq(query), self.wk(keys), self.wv(values), heads=self.heads
        )
        return self.wo(attended)


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(x)))


class EncoderBlock(Module):
    """One post-norm transformer block: attention + residual, FFN + residual."""

    def __init__(self, dim: int, heads: int, ffn_hidden: int, rng: np.random.Generator):
        super().__init__()
        self.attn = MultiHeadAttention(dim, heads, rng)
        self.norm1 = LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_hidden, rng)
        self.norm2 = LayerNorm(dim)

    def __call__(self, query: Tensor, keys: Tensor, values: Tensor) -> Tensor:
        h = self.norm1(query + self.attn(query, keys, values))
        return self.norm2(h + self.ffn(h))
