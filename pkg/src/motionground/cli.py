"""Command-line surface.

Subcommands:

* ``gen``       write a synthetic dataset (with a JSONL manifest next to it)
* ``train``     fit a model and save the best checkpoint
* ``eval``      score a checkpoint on a dataset
* ``ablate``    run the variant sweep over seeds and print a comparison table
* ``gradcheck`` run the finite-difference oracle suite
* ``inspect``   dump one sample's slot and frame attention weights as JSON

Every subcommand exits 0 on success and nonzero with a one-line diagnostic
on failure; unknown flags print usage and exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

__all__ = ["cli", "entry"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionground",
        description="Train and probe the motion-appearance grounding model "
                    "on synthetic scenes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--count", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="run config JSON (dims and vocabulary)")
    p.add_argument("--motion-frac", type=float, default=0.0,
                   help="fraction with a motion-confusable distractor")
    p.add_argument("--appearance-frac", type=float, default=0.0,
                   help="fraction with an appearance-confusable distractor")
    p.add_argument("--both-frac", type=float, default=0.0,
                   help="fraction with both distractor types")

    p = sub.add_parser("train", help="fit a model and save the best checkpoint")
    p.add_argument("--config", help="run config JSON; defaults used if omitted")
    p.add_argument("--train", dest="train_path", help="training dataset")
    p.add_argument("--val", dest="val_path", help="validation dataset")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--trace", help="JSONL loss/metric trace path")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true", help="emit the report as JSON")

    p = sub.add_parser("ablate", help="variant sweep over seeds")
    p.add_argument("--config", help="base run config JSON")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..n-1)")
    p.add_argument("--train-count", type=int, default=500)
    p.add_argument("--test-count", type=int, default=200)
    p.add_argument("--motion-frac", type=float, default=0.3)
    p.add_argument("--appearance-frac", type=float, default=0.3)
    p.add_argument("--both-frac", type=float, default=0.2)
    p.add_argument("--variants", help="comma-separated subset of variants")
    p.add_argument("--out", help="write the summary as JSON here")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("gradcheck", help="finite-difference oracle suite")
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("inspect", help="dump attention weights for one sample")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", help="write JSON here instead of stdout")
    return parser


def _load_base_config(path):
    from .config import RunConfig, load_config

    return load_config(path) if path else RunConfig()


def _cmd_gen(args) -> int:
    from .dataset_io import write_dataset
    from .synthdata import generate_dataset

    config = _load_base_config(args.config)
    gen_cfg = config.generator_config()
    pairs = generate_dataset(
        gen_cfg, args.count, args.seed,
        motion_frac=args.motion_frac,
        appearance_frac=args.appearance_frac,
        both_frac=args.both_frac,
    )
    write_dataset([s for s, _ in pairs], args.out, config=gen_cfg)
    confusable = sum(
        1 for _, sc in pairs if sc.motion_confusable or sc.appearance_confusable
    )
    print(f"wrote {len(pairs)} samples to {args.out} ({confusable} confusable)")
    return 0


def _cmd_train(args) -> int:
    from .checkpoint import Checkpoint, save_checkpoint
    from .dataset_io import read_dataset
    from .training import train

    config = _load_base_config(args.config)
    train_path = args.train_path or config.train_path
    if not train_path:
        raise ValueError("no training dataset: pass --train or set train_path")
    val_path = args.val_path or config.val_path
    train_set = read_dataset(train_path)
    val_set = read_dataset(val_path) if val_path else None
    log = None if args.quiet else print
    result = train(config, train_set, val_set=val_set,
                   trace_path=args.trace, log=log)
    save_checkpoint(args.out, Checkpoint(
        config=config,
        params=result.best_params,
        opt_state=result.best_opt_state,
        opt_step=result.best_opt_step,
        epoch=result.best_epoch,
        best_metric=result.best_metric,
    ))
    if result.best_metric is None:
        print(f"trained {result.epochs_run} epochs; checkpoint: {args.out}")
    else:
        print(f"trained {result.epochs_run} epochs; best R@1,IoU>0.5 = "
              f"{result.best_metric:.2f} (epoch {result.best_epoch}); "
              f"checkpoint: {args.out}")
    return 0


def _restore(checkpoint_path):
    from .checkpoint import load_checkpoint
    from .model import GroundingModel

    ckpt = load_checkpoint(checkpoint_path)
    model = GroundingModel(ckpt.config)
    model.load_state(ckpt.params)
    return ckpt, model


def _cmd_eval(args) -> int:
    from .dataset_io import read_dataset
    from .training import evaluate_model

    ckpt, model = _restore(args.checkpoint)
    samples = read_dataset(args.data)
    report = evaluate_model(
        model, samples, meta={"checkpoint": args.checkpoint, "data": args.data}
    )
    print(report.as_json() if args.json else report.as_text())
    return 0


def _cmd_ablate(args) -> int:
    from .ablation import run_ablation
    from .model import VARIANTS

    base = _load_base_config(args.config)
    variants = tuple(args.variants.split(",")) if args.variants else VARIANTS
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ValueError(f"unknown variants: {unknown}; choose from {VARIANTS}")
    summary = run_ablation(
        base,
        seeds=tuple(range(args.seeds)),
        train_count=args.train_count,
        test_count=args.test_count,
        mix=(args.motion_frac, args.appearance_frac, args.both_frac),
        variants=variants,
        log=None if args.quiet else print,
    )
    print(summary.table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(summary.as_dict(), fh, indent=2)
        print(f"summary written to {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    records = run_suite(tol=args.tol)
    for rec in records:
        print(rec)
    failed = [r for r in records if not r.passed]
    print(f"{len(records) - len(failed)}/{len(records)} checks passed")
    return 1 if failed else 0


def _softmax_rows(a: np.ndarray) -> np.ndarray:
    z = a - a.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _cmd_inspect(args) -> int:
    from .dataset_io import read_dataset
    from .synthdata import vocabulary

    ckpt, model = _restore(args.checkpoint)
    samples = read_dataset(args.data)
    if not 0 <= args.index < len(samples):
        raise ValueError(f"index {args.index} out of range (0..{len(samples) - 1})")
    sample = samples[args.index]
    out = model.forward(sample)
    vocab = vocabulary(ckpt.config.generator_config())

    payload = {
        "sample_id": sample.sample_id,
        "query": [vocab[i] for i in sample.query_ids],
        "gt_segment": list(sample.gt_segment),
        "predictions": [list(p) for p in model.predict(sample)],
        "slot_weights": {
            "appearance": _softmax_rows(out.appearance.scores.data).tolist(),
            "motion": (
                _softmax_rows(out.motion.scores.data).tolist() if out.motion else None
            ),
        },
        "frame_weights": (
            {
                "appearance": out.fusion.appearance_weights.tolist(),
                "motion": out.fusion.motion_weights.tolist(),
            }
            if out.fusion
            else None
        ),
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "gradcheck": _cmd_gradcheck,
    "inspect": _cmd_inspect,
}


def cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage/help text itself
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    entry()
