"""Cross-modal object reasoning.

One branch takes a modality's object features plus the query and produces
frame-level features in three stages: word-level attention gates each object
by how much the query cares about it; a dense affinity graph over all T*K
objects propagates context with a residual graph-convolution update; and a
query-guided softmax over each frame's K objects collapses them into one
frame vector.  The model instantiates this twice, motion and appearance,
with fully independent parameters.

``BaselineBranch`` is the deliberately blunter ablation stand-in: bilinear
co-attention with concatenation instead of the gated interaction, a second
co-attention instead of the graph, and mean pooling instead of query-guided
fusion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tg
from .layers import Linear, ParamSet
from .tensor import ShapeError, Tensor

__all__ = ["BranchOutput", "ReasoningBranch", "BaselineBranch"]


@dataclass
class BranchOutput:
    F_hat: Tensor  # (T*K, D) query-gated objects
    F_tilde: Tensor  # (T*K, D) graph-updated objects
    affinity: Tensor  # (T*K, T*K) row-stochastic
    H: Tensor  # (T, D) frame features
    scores: Tensor  # (T, K) per-object fusion scores (cosine, or uniform)


class ReasoningBranch:
    def __init__(
        self,
        ps: ParamSet,
        name: str,
        d: int,
        d_hidden: int | None = None,
        d_affinity: int | None = None,
        scale_affinity: bool = False,
        graph_layers: int = 1,
    ):
        d_hidden = d_hidden or d
        d_affinity = d_affinity or d
        self.d = d
        self.scale = 1.0 / np.sqrt(d_affinity) if scale_affinity else 1.0
        self.obj_proj = ps.linear(f"{name}.interact.obj", d, d_hidden)
        self.word_proj = ps.linear(f"{name}.interact.word", d, d_hidden)
        self.score_bias = ps.vector(f"{name}.interact.bias", d_hidden, d)
        self.score_vec = ps.vector(f"{name}.interact.vec", d_hidden, d_hidden)
        self.gate = Linear(ps, f"{name}.interact.gate", d, d)
        self.graph_layers = [
            {
                "src": ps.linear(f"{name}.graph{i}.src", d, d_affinity),
                "dst": ps.linear(f"{name}.graph{i}.dst", d, d_affinity),
                "mix": ps.linear(f"{name}.graph{i}.mix", d, d),
                "out": ps.linear(f"{name}.graph{i}.out", d, d),
            }
            for i in range(graph_layers)
        ]
        self.query_proj = ps.linear(f"{name}.fuse.query", d, d)

    # -- stages -------------------------------------------------------------

    def interact(self, f: Tensor, q_words: Tensor) -> Tensor:
        """Gate object rows by an additive-attention readout of the words."""
        tk = f.shape[0]
        n = q_words.shape[0]
        a = (f @ self.obj_proj).reshape(tk, 1, -1)
        b = (q_words @ self.word_proj).reshape(1, n, -1)
        scores = (tg.tanh(a + b + self.score_bias) * self.score_vec).sum(axis=2)
        attended = tg.softmax(scores, axis=1) @ q_words
        return tg.sigmoid(self.gate(attended)) * f

    def graph_update(self, f_hat: Tensor):
        """Residual graph convolution over the dense object-object affinity."""
        affinity = None
        x = f_hat
        for layer in self.graph_layers:
            logits = ((x @ layer["src"]) @ (x @ layer["dst"]).T) * self.scale
            affinity = tg.softmax(logits, axis=1)
            x = ((affinity @ x) @ layer["mix"]) @ layer["out"] + x
        return x, affinity

    def fuse(self, f_tilde: Tensor, q_global: Tensor, t: int, k: int):
        """Per-frame softmax over object-query cosine scores."""
        projected = (q_global.reshape(1, -1) @ self.query_proj).reshape(-1)
        scores = tg.cosine_rows(f_tilde, projected).reshape(t, k)
        weights = tg.softmax(scores, axis=1)
        stacked = f_tilde.reshape(t, k, self.d)
        h = (weights.reshape(t, k, 1) * stacked).sum(axis=1)
        return h, scores

    def __call__(self, f: Tensor, q_words: Tensor, q_global: Tensor,
                 t: int, k: int) -> BranchOutput:
        if f.shape[0] != t * k:
            raise ShapeError(f"expected {t * k} object rows, got {f.shape[0]}")
        f_hat = self.interact(f, q_words)
        f_tilde, affinity = self.graph_update(f_hat)
        h, scores = self.fuse(f_tilde, q_global, t, k)
        return BranchOutput(F_hat=f_hat, F_tilde=f_tilde, affinity=affinity,
                            H=h, scores=scores)


class BaselineBranch:
    """Co-attention + concatenation everywhere, mean-pooled fusion."""

    def __init__(self, ps: ParamSet, name: str, d: int):
        self.d = d
        self.word_proj = ps.linear(f"{name}.coattn.word", d, d)
        self.enhance = Linear(ps, f"{name}.coattn.enhance", 2 * d, d)
        self.rel_proj = ps.linear(f"{name}.corel.proj", d, d)
        self.rel_fc = Linear(ps, f"{name}.corel.merge", 2 * d, d)

    def __call__(self, f: Tensor, q_words: Tensor, q_global: Tensor,
                 t: int, k: int) -> BranchOutput:
        if f.shape[0] != t * k:
            raise ShapeError(f"expected {t * k} object rows, got {f.shape[0]}")
        attn = tg.softmax((f @ self.word_proj) @ q_words.T, axis=1)
        f_hat = self.enhance(tg.concat([f, attn @ q_words], axis=1))
        rel = tg.softmax((f_hat @ self.rel_proj) @ f_hat.T, axis=1)
        f_tilde = self.rel_fc(tg.concat([f_hat, rel @ f_hat], axis=1))
        h = f_tilde.reshape(t, k, self.d).mean(axis=1)
        uniform = Tensor(np.full((t, k), 1.0 / k))
        return BranchOutput(F_hat=f_hat, F_tilde=f_tilde, affinity=rel,
                            H=h, scores=uniform)
