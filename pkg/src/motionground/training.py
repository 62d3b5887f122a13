"""Training loop: minibatched loss averaging, clipped Adam updates, linear
learning-rate decay per epoch, and early stopping on validation recall.

The loop is deterministic for a fixed config: data order comes from a
dedicated shuffle stream derived from the run seed, parameter init from
another, so two runs with the same config produce identical traces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .evaluation import EvalReport, build_report
from .model import GroundingModel
from .optim import Adam
from .synthdata import GroundingSample

__all__ = ["TrainResult", "train", "evaluate_model"]


def evaluate_model(
    model: GroundingModel,
    samples: Sequence[GroundingSample],
    top_n: int = 5,
    nms_threshold: float = 0.5,
    meta: Optional[dict] = None,
) -> EvalReport:
    preds = [model.predict(s, top_n=top_n, nms_threshold=nms_threshold) for s in samples]
    gts = [s.gt_segment for s in samples]
    return build_report(preds, gts, meta=meta or {})


@dataclass
class TrainResult:
    model: GroundingModel               # parameters restored to the best epoch
    best_params: Dict[str, np.ndarray]
    best_opt_state: Dict[str, np.ndarray]
    best_opt_step: int
    best_metric: Optional[float]
    best_epoch: int
    trace: List[dict] = field(default_factory=list)
    stopped_early: bool = False
    epochs_run: int = 0


def _batches(order: np.ndarray, size: int):
    for lo in range(0, len(order), size):
        yield order[lo:lo + size]


def train(
    config: RunConfig,
    train_set: Sequence[GroundingSample],
    val_set: Optional[Sequence[GroundingSample]] = None,
    trace_path: Optional[str] = None,
    stop_when: Optional[Tuple[int, float, float]] = None,
    log: Optional[Callable[[str], None]] = None,
) -> TrainResult:
    """Fit a model built from ``config`` on ``train_set``.

    ``stop_when=(n, m, target)`` ends training as soon as the validation
    report's R@n,IoU>m cell reaches ``target`` percent.  Early stopping
    tracks R@1,IoU>0.5 with ``config.patience``; the returned model always
    carries the best validated parameters seen, never later, worse ones.
    """
    if not train_set:
        raise ValueError("empty training set")
    model = GroundingModel(config)
    opt = Adam(
        model.params.tensors,
        lr=config.lr,
        betas=(config.beta1, config.beta2),
        eps=config.adam_eps,
        clip_norm=config.clip_norm,
    )
    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(11,))
    )

    result = TrainResult(
        model=model,
        best_params=model.snapshot(),
        best_opt_state={k: v.copy() for k, v in opt.state_tensors().items()},
        best_opt_step=0,
        best_metric=None,
        best_epoch=-1,
    )
    stale = 0
    trace_fh = open(trace_path, "w", encoding="utf-8") if trace_path else None
    try:
        for epoch in range(config.epochs):
            lr_epoch = config.lr * (1.0 - epoch / config.epochs)
            opt.lr = lr_epoch
            order = shuffle_rng.permutation(len(train_set))
            losses = []
            for batch in _batches(order, config.batch_size):
                opt.zero_grad()
                total = None
                for idx in batch:
                    sample = train_set[idx]
                    loss, _, _, _ = model.loss(sample)
                    if not np.isfinite(loss.item()):
                        raise FloatingPointError(
                            f"non-finite loss at sample '{sample.sample_id}' "
                            f"(epoch {epoch})"
                        )
                    total = loss if total is None else total + loss
                total = total * (1.0 / len(batch))
                total.backward()
                opt.step()
                losses.append(total.item())
            entry = {
                "epoch": epoch,
                "lr": lr_epoch,
                "loss": float(np.mean(losses)),
            }

            if val_set:
                report = evaluate_model(model, val_set)
                entry["val"] = report.score()
                if result.best_metric is None or report.score() > result.best_metric:
                    result.best_metric = report.score()
                    result.best_params = model.snapshot()
                    result.best_opt_state = {
                        k: v.copy() for k, v in opt.state_tensors().items()
                    }
                    result.best_opt_step = opt.t
                    result.best_epoch = epoch
                    stale = 0
                else:
                    stale += 1
                entry["best"] = result.best_metric
            result.trace.append(entry)
            if trace_fh:
                trace_fh.write(json.dumps(entry) + "\n")
                trace_fh.flush()
            if log:
                val_txt = f" val={entry.get('val', float('nan')):.2f}" if val_set else ""
                log(f"epoch {epoch:4d} lr={lr_epoch:.2e} loss={entry['loss']:.5f}{val_txt}")

            result.epochs_run = epoch + 1
            if stop_when and val_set:
                n, m, target = stop_when
                if report.grid[(n, m)] >= target:
                    # the current parameters are the ones that meet the target
                    result.best_metric = report.score()
                    result.best_params = model.snapshot()
                    result.best_opt_state = {
                        k: v.copy() for k, v in opt.state_tensors().items()
                    }
                    result.best_opt_step = opt.t
                    result.best_epoch = epoch
                    result.stopped_early = True
                    break
            if val_set and stale >= config.patience:
                result.stopped_early = True
                break
    finally:
        if trace_fh:
            trace_fh.close()

    if val_set:
        model.load_state(result.best_params)
        opt.load_state_tensors(result.best_opt_state, result.best_opt_step)
    else:
        # no validation split: the final parameters are the artifact
        result.best_params = model.snapshot()
        result.best_opt_state = {k: v.copy() for k, v in opt.state_tensors().items()}
        result.best_opt_step = opt.t
        result.best_epoch = config.epochs - 1
    return result
