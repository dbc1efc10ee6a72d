"""Adam optimizer with bias correction.

Defaults follow the common convention: lr=1e-3, beta1=0.9, beta2=0.999,
eps=1e-8. Weight decay, when nonzero, is decoupled from the adaptive
update and skips bias vectors. A NaN or infinite gradient aborts the step
with an error naming the parameter, since silently updating from a
poisoned gradient corrupts the whole run.
"""

from __future__ import annotations

import numpy as np

from .autodiff import GradientError, Tensor

__all__ = ["Adam"]


class Adam:
    def __init__(
        self,
        params: list[Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        names: list[str] | None = None,
    ):
        self.params = list(params)
        self.names = list(names) if names else [f"param[{i}]" for i in range(len(self.params))]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise GradientError(f"non-finite gradient for {self.names[i]}")
            self.m[i] += (1.0 - self.beta1) * (g - self.m[i])
            self.v[i] += (1.0 - self.beta2) * (g * g - self.v[i])
            m_hat = self.m[i] / b1t
            v_hat = self.v[i] / b2t
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay and not self.names[i].endswith("bias"):
                p.data = p.data - self.lr * self.weight_decay * p.data

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"t": np.array([self.t], dtype=np.float64)}
        for i in range(len(self.params)):
            out[f"m.{i}"] = self.m[i]
            out[f"v.{i}"] = self.v[i]
        return out
