"""Recall-at-n over IoU thresholds, and the report container.

A sample counts as a hit for (n, m) when any of its n highest-scored
predicted segments overlaps the ground truth with IoU strictly greater
than m.  Scores are percentages over the split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .grounding import iou

__all__ = ["recall_at", "EvalReport", "build_report", "DEFAULT_NS", "DEFAULT_MS"]

DEFAULT_NS = (1, 5)
DEFAULT_MS = (0.3, 0.5, 0.7)

Segment = Tuple[float, float]
Prediction = Tuple[float, float, float]  # start, end, score


def recall_at(
    n: int,
    m: float,
    predictions_per_sample: Sequence[Sequence[Prediction]],
    gts: Sequence[Segment],
) -> float:
    """Percentage of samples whose top-n predictions contain a segment with
    IoU > m against the ground truth."""
    if len(predictions_per_sample) == 0:
        raise ValueError("recall over an empty split is undefined")
    if len(predictions_per_sample) != len(gts):
        raise ValueError(
            f"{len(predictions_per_sample)} prediction lists vs {len(gts)} ground truths"
        )
    hits = 0
    for preds, gt in zip(predictions_per_sample, gts):
        top = sorted(preds, key=lambda p: -p[2])[:n]
        if any(iou((p[0], p[1]), gt) > m for p in top):
            hits += 1
    return 100.0 * hits / len(gts)


@dataclass
class EvalReport:
    grid: Dict[Tuple[int, float], float]
    best_ious: List[float]  # top-1 IoU per sample, in split order
    sample_count: int
    ns: Tuple[int, ...] = DEFAULT_NS
    ms: Tuple[float, ...] = DEFAULT_MS
    meta: Dict = field(default_factory=dict)

    def score(self, n: int = 1, m: float = 0.5) -> float:
        """Headline number; the default cell drives model selection."""
        return self.grid[(n, m)]

    def check_monotone(self):
        """Recall can only grow with n and shrink as the threshold rises."""
        for m in self.ms:
            for a, b in zip(self.ns, self.ns[1:]):
                assert self.grid[(a, m)] <= self.grid[(b, m)] + 1e-9
        for n in self.ns:
            for a, b in zip(self.ms, self.ms[1:]):
                assert self.grid[(n, a)] >= self.grid[(n, b)] - 1e-9

    def as_text(self) -> str:
        header = ["      "] + [f"IoU>{m:<6.2f}" for m in self.ms]
        lines = ["".join(header)]
        for n in self.ns:
            row = [f"R@{n:<4d}"] + [f"{self.grid[(n, m)]:<10.2f}" for m in self.ms]
            lines.append("".join(row))
        lines.append(f"samples: {self.sample_count}")
        return "\n".join(lines)

    def as_json(self) -> str:
        payload = {
            "sample_count": self.sample_count,
            "grid": {
                f"R@{n},IoU>{m:g}": self.grid[(n, m)] for n in self.ns for m in self.ms
            },
            "best_ious": self.best_ious,
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2)


def build_report(
    predictions_per_sample: Sequence[Sequence[Prediction]],
    gts: Sequence[Segment],
    ns: Tuple[int, ...] = DEFAULT_NS,
    ms: Tuple[float, ...] = DEFAULT_MS,
    meta: Dict | None = None,
) -> EvalReport:
    grid = {
        (n, m): recall_at(n, m, predictions_per_sample, gts) for n in ns for m in ms
    }
    best = []
    for preds, gt in zip(predictions_per_sample, gts):
        top = max(preds, key=lambda p: p[2], default=None)
        best.append(iou((top[0], top[1]), gt) if top else 0.0)
    report = EvalReport(
        grid=grid,
        best_ious=best,
        sample_count=len(gts),
        ns=tuple(ns),
        ms=tuple(ms),
        meta=meta or {},
    )
    report.check_monotone()
    return report
