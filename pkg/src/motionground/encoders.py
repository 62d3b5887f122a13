"""Video and query encoders.

The video side lifts raw object tracks into model space: each object feature
is joined with a projection of its bounding box and a sinusoidal encoding of
its frame index, frame-level global features get the same index encoding,
and the expanded global stream is fused back into every object row.  The
appearance and motion streams run through structurally identical but fully
separate parameter sets.

The query side embeds tokens, lets them exchange information through
multi-head self-attention (with residual), then runs a bidirectional GRU;
per-token states of the two directions are concatenated and projected into
word features, and the two directions' states at the last position are
concatenated and projected into the sentence feature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as tg
from .layers import GRU, Linear, MultiHeadSelfAttention, ParamSet
from .synthdata import GroundingSample
from .tensor import ShapeError, Tensor

__all__ = ["position_encoding", "EncodedVideo", "EncodedQuery", "VideoEncoder", "QueryEncoder"]


def position_encoding(index: int, dim: int) -> np.ndarray:
    """Sinusoidal index encoding: component 2i is sin(index / 10000^(2i/dim)),
    component 2i+1 the matching cos."""
    if dim % 2 != 0:
        raise ShapeError(f"position encoding dim must be even, got {dim}")
    if index < 0:
        raise ValueError(f"index must be nonnegative, got {index}")
    i = np.arange(dim // 2)
    angle = index / np.power(10000.0, 2.0 * i / dim)
    out = np.empty(dim)
    out[0::2] = np.sin(angle)
    out[1::2] = np.cos(angle)
    return out


def _encoding_table(t: int, dim: int) -> np.ndarray:
    return np.stack([position_encoding(i, dim) for i in range(t)])


@dataclass
class EncodedVideo:
    F_a: Tensor  # (T*K, D)
    F_m: Optional[Tensor]  # (T*K, D), absent when the motion encoder is off
    T: int
    K: int


@dataclass
class EncodedQuery:
    Q: Tensor  # (N, D) word features
    q_global: Tensor  # (D,) sentence feature


class _StreamEncoder:
    """One modality's path: box + index encoding, local/global fusion."""

    def __init__(self, ps: ParamSet, name: str, d_in: int, d: int):
        self.d_in = d_in
        self.box_fc = Linear(ps, f"{name}.box", 4, d_in)
        self.local_fc = Linear(ps, f"{name}.local", 3 * d_in, d)
        self.global_fc = Linear(ps, f"{name}.global", 2 * d_in, d)
        self.out_fc = Linear(ps, f"{name}.fuse", 2 * d, d)

    def __call__(self, local: np.ndarray, global_: np.ndarray, boxes: np.ndarray):
        t, k, d_in = local.shape
        if d_in != self.d_in:
            raise ShapeError(f"feature dim {d_in} does not match encoder dim {self.d_in}")
        pe = _encoding_table(t, d_in)
        e_b = self.box_fc(Tensor(boxes.reshape(t * k, 4)))
        local_in = tg.concat(
            [Tensor(local.reshape(t * k, d_in)), e_b, Tensor(np.repeat(pe, k, axis=0))],
            axis=1,
        )
        v_local = self.local_fc(local_in)
        v_global = self.global_fc(tg.concat([Tensor(global_), Tensor(pe)], axis=1))
        expanded = tg.repeat_rows(v_global, k)  # row t serves all K slots of frame t
        return self.out_fc(tg.concat([v_local, expanded], axis=1))


class VideoEncoder:
    def __init__(self, ps: ParamSet, d_in: int, d: int, with_motion: bool = True):
        self.appearance = _StreamEncoder(ps, "video.appearance", d_in, d)
        self.motion = _StreamEncoder(ps, "video.motion", d_in, d) if with_motion else None

    def __call__(self, sample: GroundingSample) -> EncodedVideo:
        t, k, _, _ = sample.dims
        f_a = self.appearance(sample.appearance_local, sample.appearance_global, sample.boxes)
        f_m = None
        if self.motion is not None:
            f_m = self.motion(sample.motion_local, sample.motion_global, sample.boxes)
        return EncodedVideo(F_a=f_a, F_m=f_m, T=t, K=k)


class QueryEncoder:
    def __init__(self, ps: ParamSet, vocab: int, d: int, heads: int = 8):
        if d % 2 != 0:
            raise ShapeError(f"model dim must be even for a bidirectional split, got {d}")
        self.vocab = vocab
        self.table = ps.embedding("query.embed", vocab, d)
        self.attention = MultiHeadSelfAttention(ps, "query.attn", d, heads)
        self.fwd = GRU(ps, "query.gru_fwd", d, d // 2)
        self.bwd = GRU(ps, "query.gru_bwd", d, d // 2)
        self.word_fc = Linear(ps, "query.word", d, d)
        self.sent_fc = Linear(ps, "query.sent", d, d)

    def __call__(self, query_ids) -> EncodedQuery:
        ids = np.asarray(query_ids, dtype=np.int64)
        if ids.size and ids.max() >= self.vocab:
            raise IndexError(
                f"query id {int(ids.max())} outside vocabulary of {self.vocab}"
            )
        x = tg.embedding_rows(self.table, ids)
        x = self.attention(x)
        h_fwd = self.fwd.run(x)
        h_bwd = self.bwd.run(x, reverse=True)
        n = ids.size
        q_words = self.word_fc(tg.concat([h_fwd, h_bwd], axis=1))
        # the backward direction's state at the last position is its first
        # scan step; both directions are read off at position N-1
        last = tg.concat([h_fwd[n - 1 : n], h_bwd[n - 1 : n]], axis=1)
        q_global = self.sent_fc(last).reshape(-1)
        return EncodedQuery(Q=q_words, q_global=q_global)
