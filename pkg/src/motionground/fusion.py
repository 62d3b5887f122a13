"""Associating the two frame-level streams before the grounding head.

Three steps, each individually switchable for ablations:

1. motion-guided appearance enhancement: a frame-independent three-layer
   feed-forward adapter maps the motion stream into appearance space and is
   added residually.  The last layer starts narrow so training begins near
   the passthrough point; with its weights set to exactly zero the step IS
   the passthrough, which the identity tests exercise.
2. appearance-fused motion enhancement: parameter-free dot-product attention
   from motion rows over the (possibly enhanced) appearance rows, added
   residually.
3. query-guided fusion: each stream gets a softmax distribution over frames
   from its dot products with the sentence feature; the two weighted streams
   are summed, frame-aligned.

With both enhancements switched off this reduces to step 3 applied to the
raw streams, which is exactly the no-association ablation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tg
from .layers import Linear, ParamSet
from .tensor import ShapeError, Tensor

__all__ = ["FusionInfo", "AssociationFusion"]


@dataclass
class FusionInfo:
    appearance_weights: np.ndarray  # (T,) softmax over frames
    motion_weights: np.ndarray  # (T,)


class AssociationFusion:
    def __init__(self, ps: ParamSet, d: int, motion_guided: bool = True,
                 appearance_fused: bool = True):
        self.motion_guided = motion_guided
        self.appearance_fused = appearance_fused
        if motion_guided:
            self.adapt_in = Linear(ps, "assoc.adapt.in", d, d)
            self.adapt_mid = Linear(ps, "assoc.adapt.mid", d, d)
            # narrow output init: training starts near the passthrough point
            # while the adapter still receives gradient from the first step
            self.adapt_out = Linear(ps, "assoc.adapt.out", d, d, scale=0.1)

    def enhance_appearance(self, h_a: Tensor, h_m: Tensor) -> Tensor:
        adapted = self.adapt_out(
            tg.relu(self.adapt_mid(tg.relu(self.adapt_in(h_m))))
        )
        return h_a + adapted

    @staticmethod
    def enhance_motion(h_m: Tensor, h_a_enh: Tensor) -> Tensor:
        attn = tg.softmax(h_m @ h_a_enh.T, axis=1)
        return h_m + attn @ h_a_enh

    @staticmethod
    def query_fuse(h_a: Tensor, h_m: Tensor, q_global: Tensor):
        if h_a.shape != h_m.shape:
            raise ShapeError(f"stream shapes differ: {h_a.shape} vs {h_m.shape}")
        q_col = q_global.reshape(-1, 1)
        w_a = tg.softmax(h_a @ q_col, axis=0)
        w_m = tg.softmax(h_m @ q_col, axis=0)
        fused = w_a * h_a + w_m * h_m
        info = FusionInfo(
            appearance_weights=w_a.data.reshape(-1).copy(),
            motion_weights=w_m.data.reshape(-1).copy(),
        )
        return fused, info

    def __call__(self, h_a: Tensor, h_m: Tensor, q_global: Tensor):
        a = self.enhance_appearance(h_a, h_m) if self.motion_guided else h_a
        m = self.enhance_motion(h_m, a) if self.appearance_fused else h_m
        return self.query_fuse(a, m, q_global)
