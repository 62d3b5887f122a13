"""Variant sweep: train every ablation variant over several seeds on shared
synthetic splits and summarize recall per variant.

All variants at a given seed see identical train and test samples, so the
only differences between rows are the architecture switches.  The test split
doubles as the early-stopping monitor; this is symmetric across variants and
keeps the sweep cheap.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .model import VARIANTS, variant_config
from .training import evaluate_model, train

__all__ = ["AblationSummary", "run_ablation", "DEFAULT_MIX"]

# train/test mix: 30% motion-confusable, 30% appearance-confusable,
# 20% both, 20% clean
DEFAULT_MIX = (0.3, 0.3, 0.2)


@dataclass
class AblationSummary:
    variants: Tuple[str, ...]
    seeds: Tuple[int, ...]
    scores: Dict[str, List[float]] = field(default_factory=dict)
    motion_scores: Dict[str, List[float]] = field(default_factory=dict)
    motion_subset_size: int = 0
    test_size: int = 0

    def mean(self, variant: str) -> float:
        return float(np.mean(self.scores[variant]))

    def std(self, variant: str) -> float:
        return float(np.std(self.scores[variant]))

    def motion_mean(self, variant: str) -> float:
        return float(np.mean(self.motion_scores[variant]))

    def table(self) -> str:
        lines = [
            f"{'variant':20s}  {'R@1,IoU>0.5':>16s}  {'motion subset':>16s}",
        ]
        for v in self.variants:
            overall = f"{self.mean(v):6.2f} +/- {self.std(v):5.2f}"
            motion = (
                f"{self.motion_mean(v):6.2f} +/- "
                f"{float(np.std(self.motion_scores[v])):5.2f}"
            )
            lines.append(f"{v:20s}  {overall:>16s}  {motion:>16s}")
        lines.append(
            f"seeds: {list(self.seeds)}; test samples: {self.test_size} "
            f"({self.motion_subset_size} motion-confusable)"
        )
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "variants": list(self.variants),
            "seeds": list(self.seeds),
            "scores": self.scores,
            "motion_scores": self.motion_scores,
            "mean": {v: self.mean(v) for v in self.variants},
            "std": {v: self.std(v) for v in self.variants},
            "motion_mean": {v: self.motion_mean(v) for v in self.variants},
            "test_size": self.test_size,
            "motion_subset_size": self.motion_subset_size,
        }


def _split_seeds(run_seed: int) -> Tuple[int, int]:
    # disjoint per-sample seed ranges for train vs test at every run seed
    return 2 * run_seed + 1, 2 * run_seed + 2


def run_ablation(
    base: RunConfig,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    train_count: int = 500,
    test_count: int = 200,
    mix: Tuple[float, float, float] = DEFAULT_MIX,
    variants: Sequence[str] = VARIANTS,
    stop_when: Optional[Tuple[int, float, float]] = None,
    log: Optional[Callable[[str], None]] = None,
) -> AblationSummary:
    from .synthdata import generate_dataset  # local import to keep cycles out

    summary = AblationSummary(
        variants=tuple(variants),
        seeds=tuple(seeds),
        scores={v: [] for v in variants},
        motion_scores={v: [] for v in variants},
    )
    motion_frac, appearance_frac, both_frac = mix
    gen_cfg = base.generator_config()

    for run_seed in seeds:
        train_seed, test_seed = _split_seeds(run_seed)
        train_pairs = generate_dataset(
            gen_cfg, train_count, train_seed, motion_frac, appearance_frac, both_frac
        )
        test_pairs = generate_dataset(
            gen_cfg, test_count, test_seed, motion_frac, appearance_frac, both_frac
        )
        train_set = [s for s, _ in train_pairs]
        test_set = [s for s, _ in test_pairs]
        motion_subset = [
            s for s, script in test_pairs
            if script.motion_confusable and not script.appearance_confusable
        ]
        summary.test_size = len(test_set)
        summary.motion_subset_size = len(motion_subset)

        for variant in variants:
            cfg = variant_config(dataclasses.replace(base, seed=run_seed), variant)
            result = train(cfg, train_set, val_set=test_set, stop_when=stop_when)
            score = result.best_metric
            motion_report = evaluate_model(result.model, motion_subset)
            summary.scores[variant].append(float(score))
            summary.motion_scores[variant].append(motion_report.score())
            if log:
                log(
                    f"seed {run_seed} {variant:20s} R@1,IoU>0.5={score:6.2f} "
                    f"motion={motion_report.score():6.2f} "
                    f"epochs={result.epochs_run}"
                )
    return summary
