"""Finite-difference verification of backward rules.

Central differences with step eps give an independent numerical estimate of
d loss / d x for every input element; the relative error against the analytic
gradient is max |a - n| / max(|a|, |n|, 1), which stays meaningful when the
true gradient is near zero.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor

__all__ = ["numeric_grad", "grad_rel_error", "check_op", "run_suite", "CheckRecord"]


def numeric_grad(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[Tensor],
    wrt: int,
    eps: float = 1e-6,
) -> np.ndarray:
    """Central-difference gradient of scalar ``fn(inputs)`` w.r.t. ``inputs[wrt]``."""
    x = inputs[wrt]
    g = np.zeros_like(x.data)
    for idx in np.ndindex(x.data.shape):
        orig = x.data[idx]
        x.data[idx] = orig + eps
        hi = fn(inputs).item()
        x.data[idx] = orig - eps
        lo = fn(inputs).item()
        x.data[idx] = orig
        g[idx] = (hi - lo) / (2.0 * eps)
    return g


def grad_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-case elementwise relative error between the two gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_op(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-6,
) -> float:
    """Max relative error over all differentiable inputs of scalar ``fn``.

    Runs one analytic backward pass, then a numeric pass per input, and
    returns the worst relative error seen.  Inputs must have
    ``requires_grad=True`` to be checked.
    """
    for t in inputs:
        t.zero_grad()
    out = fn(inputs)
    out.backward()
    worst = 0.0
    for i, t in enumerate(inputs):
        if not t.requires_grad:
            continue
        num = numeric_grad(fn, inputs, i, eps=eps)
        ana = t.grad if t.grad is not None else np.zeros_like(t.data)
        worst = max(worst, grad_rel_error(ana, num))
    return worst


class CheckRecord:
    """One named oracle comparison: worst relative error against a bound."""

    __slots__ = ("name", "error", "tol")

    def __init__(self, name: str, error: float, tol: float):
        self.name = name
        self.error = error
        self.tol = tol

    @property
    def passed(self) -> bool:
        return self.error <= self.tol

    def __repr__(self):
        status = "ok" if self.passed else "FAIL"
        return f"{status:4s} {self.name:32s} err={self.error:.3e} tol={self.tol:.0e}"


def run_suite(tol: float = 1e-4):
    """Finite-difference oracles over every op family and the composite
    blocks, on tiny dimensions.  Returns a list of CheckRecord."""
    from . import tensor as tn
    from .branch import ReasoningBranch
    from .config import RunConfig
    from .fusion import AssociationFusion
    from .grounding import GroundingHead, generate_proposals, grounding_loss
    from .layers import ParamSet
    from .model import GroundingModel
    from .synthdata import generate_sample

    rng = np.random.default_rng(20240817)
    records = []

    def check(name, fn, inputs, eps=1e-6, bound=None):
        err = check_op(fn, inputs, eps=eps)
        records.append(CheckRecord(name, err, tol if bound is None else bound))

    def t(*shape, scale=1.0, away_from=None, margin=0.2):
        data = rng.normal(scale=scale, size=shape)
        if away_from is not None:
            for kink in away_from:
                close = np.abs(data - kink) < margin
                data = np.where(close, kink + np.sign(data - kink + 1e-12) * margin, data)
        return Tensor(data, requires_grad=True)

    # -- elementwise and shape ops -----------------------------------------
    check("add.broadcast", lambda i: (i[0] + i[1]).sum(), [t(3, 4), t(4)])
    check("mul.broadcast", lambda i: (i[0] * i[1]).sum(), [t(3, 4), t(3, 1)])
    check("div", lambda i: (i[0] / i[1]).sum(), [t(3, 4), Tensor(rng.uniform(1, 2, (3, 4)), requires_grad=True)])
    check("matmul", lambda i: (i[0] @ i[1]).sum(), [t(3, 4), t(4, 2)])
    check("transpose.reshape", lambda i: (i[0].T.reshape(8) * i[0].T.reshape(8)).sum(), [t(2, 4)])
    check("concat", lambda i: tn.concat([i[0], i[1]], axis=0).sum(), [t(2, 3), t(1, 3)])
    check("getitem", lambda i: (i[0][np.array([0, 2, 0])] * i[0][np.array([0, 2, 0])]).sum(), [t(4, 3)])
    check("sum.axis", lambda i: (tn.tensor_sum(i[0], axis=1) * tn.tensor_sum(i[0], axis=1)).sum(), [t(3, 5)])
    check("mean.keepdims", lambda i: ((i[0] - tn.tensor_mean(i[0], axis=1, keepdims=True)) * i[0]).sum(), [t(3, 5)])
    check("tanh", lambda i: tn.tanh(i[0]).sum(), [t(3, 3)])
    check("sigmoid", lambda i: tn.sigmoid(i[0]).sum(), [t(3, 3, scale=3)])
    check("relu", lambda i: tn.relu(i[0]).sum(), [t(4, 4, away_from=(0.0,))])
    check("exp", lambda i: tn.exp(i[0]).sum(), [t(3, 3)])
    check("log", lambda i: tn.log(i[0]).sum(), [Tensor(rng.uniform(0.5, 2, (3, 3)), requires_grad=True)])
    check("sqrt", lambda i: tn.sqrt(i[0]).sum(), [Tensor(rng.uniform(0.5, 2, (3, 3)), requires_grad=True)])
    check("clip", lambda i: tn.clip(i[0], -1.0, 1.0).sum(), [t(4, 4, scale=2, away_from=(-1.0, 1.0))])
    check("smooth_l1", lambda i: tn.smooth_l1(i[0]).sum(), [t(4, 4, scale=2, away_from=(-1.0, 0.0, 1.0))])
    check("softmax", lambda i: (tn.softmax(i[0], axis=1) * i[1]).sum(), [t(3, 5), t(3, 5)])
    check("embedding_rows", lambda i: tn.embedding_rows(i[0], np.array([1, 0, 1])).sum(), [t(3, 4)])
    check("broadcast_rows", lambda i: (tn.broadcast_rows(i[0], 4) * i[1]).sum(), [t(5), t(4, 5)])
    check("repeat_rows", lambda i: (tn.repeat_rows(i[0], 3) * i[1]).sum(), [t(2, 4), t(6, 4)])
    check("take_pairs", lambda i: tn.take_pairs(i[0], np.array([0, 1, 1]), np.array([2, 0, 1])).sum(), [t(3, 4)])
    check("cosine_rows", lambda i: (tn.cosine_rows(i[0], i[1]) * Tensor(np.arange(1.0, 4.0))).sum(), [t(3, 4), t(4)])
    check("bce_loss", lambda i: tn.bce_loss(tn.sigmoid(i[0]), np.array([0.0, 1.0, 0.3])), [t(3, scale=2)])

    # -- composite blocks --------------------------------------------------
    from .encoders import QueryEncoder, VideoEncoder
    from .synthdata import GeneratorConfig

    tiny_gen = GeneratorConfig(T=4, K=2, N=3, D_in=6, n_actions=3, n_objects=4,
                               min_event_frames=2, max_event_frames=3)
    tiny_sample = generate_sample(tiny_gen, seed=11)
    ps_v = ParamSet(np.random.default_rng(5))
    video = VideoEncoder(ps_v, d_in=6, d=4, with_motion=True)
    v_small = sorted(ps_v.tensors.values(), key=lambda p: p.data.size)[:2]

    def video_sum(_inputs):
        enc = video(tiny_sample)
        return enc.F_a.sum() + enc.F_m.sum()

    for j, p in enumerate(v_small):
        err = check_op(video_sum, [p], eps=1e-5)
        records.append(CheckRecord(f"encoder.video.param{j}", err, tol))

    ps_q = ParamSet(np.random.default_rng(6))
    query = QueryEncoder(ps_q, vocab=10, d=4, heads=2)
    q_small = sorted(ps_q.tensors.values(), key=lambda p: p.data.size)[:2]
    q_ids = np.array([1, 4, 7])

    def query_sum(_inputs):
        enc = query(q_ids)
        return enc.Q.sum() + enc.q_global.sum()

    for j, p in enumerate(q_small):
        err = check_op(query_sum, [p], eps=1e-5)
        records.append(CheckRecord(f"encoder.query.param{j}", err, tol))

    ps = ParamSet(np.random.default_rng(7))
    branch = ReasoningBranch(ps, "chk", 4)
    check(
        "branch.full",
        lambda i: branch(i[0], i[1], i[2], 3, 2).H.sum(),
        [t(6, 4), t(2, 4), t(4)],
        eps=1e-5,
    )
    ps2 = ParamSet(np.random.default_rng(8))
    maa = AssociationFusion(ps2, 6, motion_guided=True, appearance_fused=True)
    check(
        "fusion.full",
        lambda i: maa(i[0], i[1], i[2])[0].sum(),
        [t(4, 6), t(4, 6), t(6)],
        eps=1e-5,
    )
    ps3 = ParamSet(np.random.default_rng(9))
    head = GroundingHead(ps3, d=4, n_sizes=2)
    anchors = generate_proposals(6, (2, 3), 1)
    check(
        "head.loss",
        lambda i: grounding_loss(head(i[0], anchors), (0.3, 0.8))[0],
        [t(6, 4)],
        eps=1e-5,
    )

    # -- full model loss w.r.t. a few small parameter tensors --------------
    cfg = RunConfig(T=8, K=2, N=3, D=8, D_in=8, proposal_sizes=(2, 4),
                    attention_heads=2)
    model = GroundingModel(cfg)
    sample = generate_sample(cfg.generator_config(), seed=3)
    small = [p for p in model.params.tensors.values() if p.data.size <= 8][:3]

    def model_loss(_inputs):
        return model.loss(sample)[0]

    for j, p in enumerate(small):
        err = check_op(model_loss, [p], eps=1e-5)
        records.append(CheckRecord(f"model.param{j}", err, tol))
    return records
