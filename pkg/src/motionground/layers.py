"""Parameter registry and the small neural building blocks the encoders
compose: linear maps, a GRU, and multi-head self-attention.

Initialization conventions (recorded in the run configuration): linear
weights and biases uniform in +-sqrt(1/fan_in); embedding rows from
N(0, 0.02^2); zero-init is available for layers that should start as the
identity contribution.
"""

from __future__ import annotations

from typing import Dict, List

import numpy as np

from . import tensor as tg
from .tensor import ShapeError, Tensor

__all__ = ["ParamSet", "Linear", "GRU", "MultiHeadSelfAttention"]


class ParamSet:
    """Ordered name -> Tensor mapping; one instance owns a whole model."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.tensors: Dict[str, Tensor] = {}

    def _register(self, name: str, arr: np.ndarray) -> Tensor:
        if name in self.tensors:
            raise ValueError(f"duplicate parameter name '{name}'")
        t = Tensor(arr, requires_grad=True)
        self.tensors[name] = t
        return t

    def linear(self, name: str, fan_in: int, fan_out: int, scale=1.0) -> Tensor:
        bound = scale * np.sqrt(1.0 / fan_in)
        return self._register(name, self.rng.uniform(-bound, bound, (fan_in, fan_out)))

    def vector(self, name: str, dim: int, fan_in: int, scale=1.0) -> Tensor:
        bound = scale * np.sqrt(1.0 / fan_in)
        return self._register(name, self.rng.uniform(-bound, bound, dim))

    def embedding(self, name: str, rows: int, dim: int) -> Tensor:
        return self._register(name, self.rng.normal(0.0, 0.02, (rows, dim)))

    def count_values(self) -> int:
        return sum(t.size for t in self.tensors.values())


class Linear:
    """y = x W + b over row-stacked inputs."""

    def __init__(self, ps: ParamSet, name: str, fan_in: int, fan_out: int,
                 scale=1.0):
        self.W = ps.linear(f"{name}.W", fan_in, fan_out, scale=scale)
        self.b = ps.vector(f"{name}.b", fan_out, fan_in, scale=scale)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.W + self.b


class GRU:
    """Single-direction gated recurrent unit over a row-per-step sequence."""

    def __init__(self, ps: ParamSet, name: str, input_dim: int, hidden: int):
        self.hidden = hidden
        def mat(g, fan_in, fan_out):
            return ps.linear(f"{name}.{g}", fan_in, fan_out)
        self.W_xz, self.W_hz = mat("W_xz", input_dim, hidden), mat("W_hz", hidden, hidden)
        self.W_xr, self.W_hr = mat("W_xr", input_dim, hidden), mat("W_hr", hidden, hidden)
        self.W_xn, self.W_hn = mat("W_xn", input_dim, hidden), mat("W_hn", hidden, hidden)
        self.b_z = ps.vector(f"{name}.b_z", hidden, input_dim)
        self.b_r = ps.vector(f"{name}.b_r", hidden, input_dim)
        self.b_n = ps.vector(f"{name}.b_n", hidden, input_dim)

    def run(self, xs: Tensor, reverse: bool = False) -> Tensor:
        """All hidden states, one row per input position (position order is
        preserved even when scanning in reverse)."""
        n = xs.shape[0]
        steps = range(n - 1, -1, -1) if reverse else range(n)
        h = Tensor(np.zeros((1, self.hidden)))
        out: List[Tensor] = [None] * n
        for i in steps:
            x = xs[i : i + 1]
            z = tg.sigmoid(x @ self.W_xz + h @ self.W_hz + self.b_z)
            r = tg.sigmoid(x @ self.W_xr + h @ self.W_hr + self.b_r)
            cand = tg.tanh(x @ self.W_xn + (r * h) @ self.W_hn + self.b_n)
            h = (1.0 - z) * cand + z * h
            out[i] = h
        return tg.concat(out, axis=0)


class MultiHeadSelfAttention:
    """Standard scaled dot-product self-attention with a residual connection.

    Keeps the last forward's per-head attention maps (plain arrays) for
    inspection and invariant checks.
    """

    def __init__(self, ps: ParamSet, name: str, dim: int, heads: int):
        if dim % heads != 0:
            raise ShapeError(f"model dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.proj_q = Linear(ps, f"{name}.q", dim, dim)
        self.proj_k = Linear(ps, f"{name}.k", dim, dim)
        self.proj_v = Linear(ps, f"{name}.v", dim, dim)
        self.proj_out = Linear(ps, f"{name}.out", dim, dim)
        self.last_attention: List[np.ndarray] = []

    def __call__(self, x: Tensor) -> Tensor:
        q, k, v = self.proj_q(x), self.proj_k(x), self.proj_v(x)
        scale = 1.0 / np.sqrt(self.head_dim)
        outs = []
        self.last_attention = []
        for h in range(self.heads):
            sl = slice(h * self.head_dim, (h + 1) * self.head_dim)
            attn = tg.softmax((q[:, sl] @ k[:, sl].T) * scale, axis=1)
            self.last_attention.append(attn.data.copy())
            outs.append(attn @ v[:, sl])
        return self.proj_out(tg.concat(outs, axis=1)) + x
