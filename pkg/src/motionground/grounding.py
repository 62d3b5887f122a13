"""Anchor proposals, confidence/offset prediction, losses, and decoding.

Anchors: for every anchor frame (stepped by ``stride``) and every nominal
size s, the window of s frames ending at that frame, clipped to the video,
normalized by T.  Multi-frame anchors whose clip collapses to a single frame
are dropped, and clipping duplicates are removed, so the proposal count R is
a property of (T, sizes, stride) rather than a free parameter.

The head turns each frame's fused feature row into per-size (confidence
logit, start offset, end offset) triples.  Training supervises confidence
with the proposal's IoU against the ground truth and regresses offsets on
positives only; decoding applies offsets, repairs degenerate intervals,
and greedily suppresses near-duplicates before taking the top n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from . import tensor as tg
from .layers import Linear, ParamSet
from .tensor import Tensor

__all__ = [
    "AnchorSet",
    "Proposals",
    "generate_proposals",
    "iou",
    "GroundingHead",
    "proposal_labels",
    "grounding_loss",
    "decode",
    "PAPER_SCALE_SIZES",
    "PAPER_SCALE_STRIDE",
]

# at T=256 this size set yields exactly the 800 proposals used at full scale
PAPER_SCALE_SIZES = (32, 64, 127, 256)
PAPER_SCALE_STRIDE = 1

_MIN_SEGMENT = 1e-6


@dataclass
class AnchorSet:
    frames: np.ndarray  # (R,) anchor frame per proposal
    size_idx: np.ndarray  # (R,) index into the configured sizes
    spans: np.ndarray  # (R, 2) normalized [start, end)
    T: int
    n_sizes: int

    def __len__(self):
        return len(self.frames)


def generate_proposals(T: int, sizes: Sequence[int], stride: int = 1) -> AnchorSet:
    if not sizes or min(sizes) < 1:
        raise ValueError(f"proposal sizes must be positive, got {tuple(sizes)}")
    if max(sizes) > T:
        raise ValueError(f"proposal size {max(sizes)} exceeds T={T}")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    frames, size_idx, spans = [], [], []
    seen = set()
    for t in range(0, T, stride):
        for si, s in enumerate(sizes):
            start = max(0, t - s + 1)
            end = t + 1  # frame window [start, end)
            if s >= 2 and end - start < 2:
                continue  # multi-frame anchor collapsed by clipping
            span = (start / T, end / T)
            if span in seen:
                continue
            seen.add(span)
            frames.append(t)
            size_idx.append(si)
            spans.append(span)
    if not frames:
        raise ValueError(
            f"no proposals survive for T={T}, sizes={tuple(sizes)}, stride={stride}"
        )
    return AnchorSet(
        frames=np.array(frames, dtype=np.int64),
        size_idx=np.array(size_idx, dtype=np.int64),
        spans=np.array(spans, dtype=np.float64),
        T=T,
        n_sizes=len(sizes),
    )


def iou(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    """Interval intersection over union on the real line."""
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


@dataclass
class Proposals:
    anchors: AnchorSet
    confidence: Tensor  # (R,) in (0, 1)
    offset_start: Tensor  # (R,)
    offset_end: Tensor  # (R,)


class GroundingHead:
    """Per-frame MLP emitting (logit, start offset, end offset) per size."""

    def __init__(self, ps: ParamSet, d: int, n_sizes: int, depth: int = 2):
        if depth < 1:
            raise ValueError(f"head depth must be at least 1, got {depth}")
        self.hidden = [Linear(ps, f"head.fc{i}", d, d) for i in range(depth - 1)]
        self.out = Linear(ps, "head.out", d, 3 * n_sizes)

    def raw(self, h: Tensor) -> Tensor:
        x = h
        for layer in self.hidden:
            x = tg.relu(layer(x))
        return self.out(x)  # (T, 3 * n_sizes)

    def __call__(self, h: Tensor, anchors: AnchorSet) -> Proposals:
        out = self.raw(h)
        base = 3 * anchors.size_idx
        logits = tg.take_pairs(out, anchors.frames, base)
        return Proposals(
            anchors=anchors,
            confidence=tg.sigmoid(logits),
            offset_start=tg.take_pairs(out, anchors.frames, base + 1),
            offset_end=tg.take_pairs(out, anchors.frames, base + 2),
        )


def proposal_labels(anchors: AnchorSet, gt_segment: Tuple[float, float]):
    """IoU labels and exact offset targets for every anchor."""
    o_gt = np.array([iou(tuple(s), gt_segment) for s in anchors.spans])
    d_start = gt_segment[0] - anchors.spans[:, 0]
    d_end = gt_segment[1] - anchors.spans[:, 1]
    return o_gt, d_start, d_end


def grounding_loss(
    proposals: Proposals,
    gt_segment: Tuple[float, float],
    positive_threshold: float = 0.55,
    boundary_weight: float = 0.005,
):
    """Total, confidence, and boundary losses as graph scalars.

    Confidence: mean binary cross-entropy of predicted confidence against
    the IoU label over all proposals.  Boundary: mean over positives (IoU
    label above the threshold) of smooth-L1 start+end offset errors; zero
    when nothing is positive.
    """
    if not 0.0 < positive_threshold < 1.0:
        raise ValueError(f"positive threshold must be in (0,1), got {positive_threshold}")
    o_gt, d_start, d_end = proposal_labels(proposals.anchors, gt_segment)
    loss_conf = tg.bce_loss(proposals.confidence, Tensor(o_gt))
    positive = np.flatnonzero(o_gt > positive_threshold)
    if positive.size:
        err_s = proposals.offset_start[positive] - Tensor(d_start[positive])
        err_e = proposals.offset_end[positive] - Tensor(d_end[positive])
        loss_boundary = (
            tg.smooth_l1(err_s).sum() + tg.smooth_l1(err_e).sum()
        ) * (1.0 / positive.size)
    else:
        loss_boundary = Tensor(0.0)
    total = loss_conf + boundary_weight * loss_boundary
    return total, loss_conf, loss_boundary


def _repair(start: float, end: float) -> Tuple[float, float]:
    """Clamp to [0,1], order the endpoints, enforce a minimum length."""
    start = min(max(start, 0.0), 1.0)
    end = min(max(end, 0.0), 1.0)
    if start > end:
        start, end = end, start
    if end - start < _MIN_SEGMENT:
        end = min(1.0, start + _MIN_SEGMENT)
        start = max(0.0, end - _MIN_SEGMENT)
    return start, end


def decode(
    spans: np.ndarray,
    scores: np.ndarray,
    offsets: np.ndarray,
    n: int,
    nms_threshold: float = 0.5,
) -> List[Tuple[float, float, float]]:
    """Top-n refined segments after greedy non-maximum suppression.

    A candidate is kept only if its IoU with every already-kept segment is
    strictly below the threshold; candidates are visited in score order.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    refined = [
        _repair(spans[i, 0] + offsets[i, 0], spans[i, 1] + offsets[i, 1])
        for i in range(len(spans))
    ]
    order = np.argsort(-np.asarray(scores), kind="stable")
    kept: List[Tuple[float, float, float]] = []
    for i in order:
        seg = refined[i]
        if all(iou(seg, (k[0], k[1])) < nms_threshold for k in kept):
            kept.append((seg[0], seg[1], float(scores[i])))
            if len(kept) == n:
                break
    return kept


def decode_proposals(
    proposals: Proposals, n: int, nms_threshold: float = 0.5
) -> List[Tuple[float, float, float]]:
    offsets = np.stack(
        [proposals.offset_start.data, proposals.offset_end.data], axis=1
    )
    return decode(
        proposals.anchors.spans, proposals.confidence.data, offsets, n, nms_threshold
    )
