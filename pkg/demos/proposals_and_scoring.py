"""From fused frame features to ranked segments: anchors, losses, greedy
suppression, and the recall report.

Run:  python3 demos/proposals_and_scoring.py
"""

import numpy as np

from motionground.evaluation import build_report
from motionground.grounding import (
    GroundingHead,
    decode_proposals,
    generate_proposals,
    grounding_loss,
    iou,
    proposal_labels,
)
from motionground.layers import ParamSet
from motionground.tensor import Tensor

T = 16
anchors = generate_proposals(T, sizes=(4, 8, 16), stride=1)
print(f"T={T}, sizes (4, 8, 16) -> {len(anchors)} proposals after dedup")
print("first few spans:", np.round(anchors.spans[:4], 3).tolist())

# ---------------------------------------------------------------------------
# labels against a ground-truth segment

gt = (0.25, 0.75)
o_gt, d_start, d_end = proposal_labels(anchors, gt)
best = int(np.argmax(o_gt))
print(f"\nground truth {gt}: best anchor covers "
      f"{np.round(anchors.spans[best], 3).tolist()} with IoU {o_gt[best]:.3f}")
print(f"positives above 0.55: {int((o_gt > 0.55).sum())} of {len(anchors)}")

# ---------------------------------------------------------------------------
# an untrained head scores random features; the loss decomposes

rng = np.random.default_rng(3)
ps = ParamSet(np.random.default_rng(3))
head = GroundingHead(ps, d=8, n_sizes=3, depth=2)
frames = Tensor(rng.normal(size=(T, 8)), requires_grad=False)
proposals = head(frames, anchors)
total, conf, boundary = grounding_loss(proposals, gt)
print(f"\nuntrained loss: total {total.item():.4f} = "
      f"confidence {conf.item():.4f} + 0.005 * boundary {boundary.item():.4f}")

# ---------------------------------------------------------------------------
# decoding: refine by offsets, repair, suppress near-duplicates

top = decode_proposals(proposals, n=3, nms_threshold=0.5)
print("\ntop-3 after suppression:")
for s, e, score in top:
    print(f"  [{s:.3f}, {e:.3f}] score {score:.3f}")
print("kept segments overlap below the 0.5 threshold pairwise:",
      all(iou(a[:2], b[:2]) < 0.5
          for i, a in enumerate(top) for b in top[i + 1:]))

# ---------------------------------------------------------------------------
# a small hand-made split turned into a recall report

predictions = [
    [(0.2, 0.7, 0.9)],            # IoU 0.8 vs (0.25, 0.75): hit everywhere
    [(0.0, 0.3, 0.8), (0.3, 0.8, 0.4)],  # best-scored misses, second hits
    [(0.6, 0.9, 0.7)],            # disjoint from its ground truth
]
gts = [(0.25, 0.75), (0.3, 0.8), (0.0, 0.4)]
report = build_report(predictions, gts)
print("\n" + report.as_text())
print("\nheadline R@1,IoU>0.5:", report.score())
