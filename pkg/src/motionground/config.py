"""Run configuration: dimensions, proposal layout, loss and optimizer knobs,
training budget, and the ablation switches that select a model variant.

Configs are plain JSON on disk and are echoed verbatim into checkpoints and
reports so every artifact records how it was produced.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Tuple

from .synthdata import GeneratorConfig

__all__ = ["RunConfig", "ConfigError", "load_config", "save_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # dimensions
    T: int = 32            # frames per video
    K: int = 4             # object slots per frame
    N: int = 4             # query length in tokens
    D: int = 64            # model width
    D_in: int = 32         # raw feature width from the generator
    D_h: Optional[int] = None   # interaction attention hidden width (None -> D)
    D_k: Optional[int] = None   # affinity projection width (None -> D)

    # proposal layout
    proposal_sizes: Tuple[int, ...] = (4, 8, 16, 32)
    proposal_stride: int = 1

    # loss
    positive_threshold: float = 0.55  # overlap above this marks a positive anchor
    boundary_weight: float = 0.005    # weight of the offset regression term

    # optimizer
    lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0

    # training budget
    epochs: int = 60
    batch_size: int = 8
    patience: int = 10
    seed: int = 0

    # ablation switches
    appearance_branch: bool = True
    motion_encoder: bool = True
    motion_branch: bool = True
    maa: bool = True
    maa_motion_guided: bool = True
    maa_appearance_fused: bool = True

    # architecture details
    graph_layers: int = 1
    scale_affinity: bool = False
    attention_heads: int = 8
    head_depth: int = 2

    # synthetic vocabulary (must match the generator that produced the data)
    n_actions: int = 6
    n_objects: int = 8

    # dataset paths, optional so a config can be partially specified
    train_path: Optional[str] = None
    val_path: Optional[str] = None

    def __post_init__(self):
        for name in ("T", "K", "N", "D", "D_in", "epochs", "batch_size",
                     "patience", "proposal_stride", "graph_layers",
                     "attention_heads", "head_depth", "n_actions", "n_objects"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("lr", "adam_eps", "clip_norm", "boundary_weight"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.positive_threshold < 1.0:
            raise ConfigError("positive_threshold must lie in (0, 1)")
        if not self.proposal_sizes:
            raise ConfigError("at least one proposal size is required")
        if any(s <= 0 or s > self.T for s in self.proposal_sizes):
            raise ConfigError("proposal sizes must lie in [1, T]")
        if self.D % 2 != 0:
            raise ConfigError("D must be even (bidirectional recurrent split)")
        if self.D % self.attention_heads != 0:
            raise ConfigError("attention_heads must divide D")
        if self.motion_branch and not self.motion_encoder:
            raise ConfigError("motion_branch requires motion_encoder")
        if self.maa and not self.motion_branch:
            raise ConfigError("maa operates on both streams; it requires motion_branch")
        if (self.maa_motion_guided or self.maa_appearance_fused) and not self.maa:
            raise ConfigError("maa enhancement switches require maa")

    # -- derived values -----------------------------------------------------

    @property
    def d_hidden(self) -> int:
        return self.D if self.D_h is None else self.D_h

    @property
    def d_affinity(self) -> int:
        return self.D if self.D_k is None else self.D_k

    def generator_config(self, **overrides) -> GeneratorConfig:
        """Generator settings consistent with this run's dimensions."""
        base = dict(
            T=self.T, K=self.K, N=self.N, D_in=self.D_in,
            n_actions=self.n_actions, n_objects=self.n_objects,
        )
        base.update(overrides)
        return GeneratorConfig(**base)

    def with_flags(self, **flags) -> "RunConfig":
        return replace(self, **flags)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["proposal_sizes"] = list(self.proposal_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "proposal_sizes" in d:
            d["proposal_sizes"] = tuple(d["proposal_sizes"])
        return cls(**d)


def save_config(config: RunConfig, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))
