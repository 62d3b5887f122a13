"""Adam with bias correction and global-norm gradient clipping.

Parameters are an ordered ``name -> Tensor`` mapping; the names make NaN
diagnostics actionable and give optimizer state stable keys in checkpoints.
Updates are pure numpy on float64, so a fixed sequence of gradients produces
bitwise identical trajectories.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from .tensor import Tensor

__all__ = ["Adam", "global_grad_norm"]


def global_grad_norm(params: Dict[str, Tensor]) -> float:
    """L2 norm of all gradients stacked into one vector; missing grads are 0."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


class Adam:
    def __init__(
        self,
        params: Dict[str, Tensor],
        lr: float = 4e-4,
        betas=(0.9, 0.999),
        eps: float = 1e-8,
        clip_norm: float = 1.0,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        """One update over all parameters; grads are clipped jointly first."""
        for name, p in self.params.items():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient in parameter '{name}'")
        norm = global_grad_norm(self.params)
        scale = 1.0
        if self.clip_norm is not None and norm > self.clip_norm:
            scale = self.clip_norm / norm
        if self.clip_norm is not None:
            # no update may proceed from an unscaled over-norm gradient
            assert norm * scale <= self.clip_norm * (1.0 + 1e-12) or norm <= self.clip_norm
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * scale
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    # -- checkpoint support -------------------------------------------------

    def state_tensors(self) -> Dict[str, np.ndarray]:
        """Moment estimates keyed for inclusion alongside model weights."""
        out = {}
        for name in self.params:
            out[f"opt.m.{name}"] = self._m[name]
            out[f"opt.v.{name}"] = self._v[name]
        return out

    def load_state_tensors(self, tensors: Dict[str, np.ndarray], t: int):
        self.t = int(t)
        for name in self.params:
            mk, vk = f"opt.m.{name}", f"opt.v.{name}"
            if mk in tensors:
                self._m[name] = np.array(tensors[mk], dtype=np.float64)
            if vk in tensors:
                self._v[name] = np.array(tensors[vk], dtype=np.float64)
