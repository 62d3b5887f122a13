"""Model assembly: video and query encoders, per-stream reasoning, stream
fusion, and the shared grounding head, wired by the ablation switches.

Variant ladder (each step keeps everything before it):

* ``baseline``            appearance only, co-attention interaction with
                          concatenation enhancement and mean-pool fusion
* ``object-reasoning``    full appearance reasoning branch
* ``motion-encoder``      motion features encoded and mean-pooled per frame,
                          averaged into the appearance frame features
* ``motion-branch``       full motion reasoning branch, streams combined by
                          query-guided weighting
* ``enhance-appearance``  adds the motion-to-appearance adapter
* ``enhance-motion``      adds the appearance-to-motion attention instead
* ``full``                both enhancements
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .branch import BaselineBranch, BranchOutput, ReasoningBranch
from .config import RunConfig
from .encoders import QueryEncoder, VideoEncoder
from .fusion import AssociationFusion, FusionInfo
from .grounding import (
    GroundingHead,
    Proposals,
    decode_proposals,
    generate_proposals,
    grounding_loss,
)
from .layers import ParamSet
from .synthdata import GroundingSample, vocab_size
from .tensor import Tensor, no_grad, tensor_mean

__all__ = ["GroundingModel", "ModelOutput", "VARIANTS", "variant_config", "build_variant"]

VARIANTS = (
    "baseline",
    "object-reasoning",
    "motion-encoder",
    "motion-branch",
    "enhance-appearance",
    "enhance-motion",
    "full",
)

_OFF = dict(
    appearance_branch=False,
    motion_encoder=False,
    motion_branch=False,
    maa=False,
    maa_motion_guided=False,
    maa_appearance_fused=False,
)

_VARIANT_FLAGS = {
    "baseline": dict(_OFF),
    "object-reasoning": dict(_OFF, appearance_branch=True),
    "motion-encoder": dict(_OFF, appearance_branch=True, motion_encoder=True),
    "motion-branch": dict(
        _OFF, appearance_branch=True, motion_encoder=True, motion_branch=True
    ),
    "enhance-appearance": dict(
        _OFF,
        appearance_branch=True,
        motion_encoder=True,
        motion_branch=True,
        maa=True,
        maa_motion_guided=True,
    ),
    "enhance-motion": dict(
        _OFF,
        appearance_branch=True,
        motion_encoder=True,
        motion_branch=True,
        maa=True,
        maa_appearance_fused=True,
    ),
    "full": dict(
        _OFF,
        appearance_branch=True,
        motion_encoder=True,
        motion_branch=True,
        maa=True,
        maa_motion_guided=True,
        maa_appearance_fused=True,
    ),
}


def variant_config(base: RunConfig, name: str) -> RunConfig:
    if name not in _VARIANT_FLAGS:
        raise ValueError(f"unknown variant '{name}'; choose from {VARIANTS}")
    return base.with_flags(**_VARIANT_FLAGS[name])


@dataclass
class ModelOutput:
    proposals: Proposals
    frames: Tensor                       # (T, D) fused frame features
    appearance: BranchOutput
    motion: Optional[BranchOutput]
    fusion: Optional[FusionInfo]


class GroundingModel:
    def __init__(self, config: RunConfig, rng: Optional[np.random.Generator] = None):
        if rng is None:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=config.seed, spawn_key=(10,))
            )
        self.config = config
        ps = ParamSet(rng)
        self.video = VideoEncoder(ps, config.D_in, config.D,
                                  with_motion=config.motion_encoder)
        self.query = QueryEncoder(ps, vocab_size(config.generator_config()),
                                  config.D, heads=config.attention_heads)
        if config.appearance_branch:
            self.appearance = ReasoningBranch(
                ps, "appearance", config.D,
                d_hidden=config.d_hidden, d_affinity=config.d_affinity,
                scale_affinity=config.scale_affinity,
                graph_layers=config.graph_layers,
            )
        else:
            self.appearance = BaselineBranch(ps, "appearance", config.D)
        self.motion = None
        self.fusion = None
        if config.motion_branch:
            self.motion = ReasoningBranch(
                ps, "motion", config.D,
                d_hidden=config.d_hidden, d_affinity=config.d_affinity,
                scale_affinity=config.scale_affinity,
                graph_layers=config.graph_layers,
            )
            self.fusion = AssociationFusion(
                ps, config.D,
                motion_guided=config.maa_motion_guided,
                appearance_fused=config.maa_appearance_fused,
            )
        self.head = GroundingHead(ps, config.D, len(config.proposal_sizes),
                                  depth=config.head_depth)
        self.anchors = generate_proposals(
            config.T, config.proposal_sizes, config.proposal_stride
        )
        self.params = ps

    # -- forward ------------------------------------------------------------

    def forward(self, sample: GroundingSample) -> ModelOutput:
        enc = self.video(sample)
        q = self.query(sample.query_ids)
        out_a = self.appearance(enc.F_a, q.Q, q.q_global, enc.T, enc.K)
        out_m = None
        info = None
        if self.config.motion_branch:
            out_m = self.motion(enc.F_m, q.Q, q.q_global, enc.T, enc.K)
            frames, info = self.fusion(out_a.H, out_m.H, q.q_global)
        elif self.config.motion_encoder:
            pooled = tensor_mean(
                enc.F_m.reshape((enc.T, enc.K, self.config.D)), axis=1
            )
            frames = (out_a.H + pooled) * 0.5
        else:
            frames = out_a.H
        proposals = self.head(frames, self.anchors)
        return ModelOutput(proposals=proposals, frames=frames,
                           appearance=out_a, motion=out_m, fusion=info)

    def loss(self, sample: GroundingSample):
        out = self.forward(sample)
        total, conf, bound = grounding_loss(
            out.proposals, sample.gt_segment,
            positive_threshold=self.config.positive_threshold,
            boundary_weight=self.config.boundary_weight,
        )
        return total, conf, bound, out

    def predict(self, sample: GroundingSample, top_n: int = 5,
                nms_threshold: float = 0.5) -> List[Tuple[float, float, float]]:
        with no_grad():
            out = self.forward(sample)
            return decode_proposals(out.proposals, top_n, nms_threshold)

    # -- parameter access ---------------------------------------------------

    def parameter_count(self) -> int:
        return self.params.count_values()

    def state(self) -> Dict[str, np.ndarray]:
        """Live parameter arrays keyed by name (not copies)."""
        return {name: t.data for name, t in self.params.tensors.items()}

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.tensors.items()}

    def load_state(self, tensors: Dict[str, np.ndarray]):
        mine = self.params.tensors
        missing = set(mine) - set(tensors)
        extra = set(tensors) - set(mine)
        if missing or extra:
            raise ValueError(
                f"parameter names do not match: missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(extra)[:3]}"
            )
        for name, t in mine.items():
            arr = np.asarray(tensors[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for '{name}': {arr.shape} vs {t.data.shape}"
                )
            t.data = arr.copy()


def build_variant(config: RunConfig, name: str,
                  rng: Optional[np.random.Generator] = None) -> GroundingModel:
    return GroundingModel(variant_config(config, name), rng)
