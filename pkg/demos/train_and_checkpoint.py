"""Train a tiny model end to end, watch the trace, then prove the
checkpoint brings back the exact same model.

Run:  python3 demos/train_and_checkpoint.py   (about half a minute)
"""

import os
import tempfile

import numpy as np

from motionground.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from motionground.config import RunConfig
from motionground.model import GroundingModel
from motionground.synthdata import generate_dataset
from motionground.training import evaluate_model, train

config = RunConfig(
    T=12, K=3, N=3, D=16, D_in=8, n_actions=4, n_objects=6,
    proposal_sizes=(4, 6, 8), attention_heads=4,
    lr=5e-3, epochs=8, batch_size=8, patience=8, seed=0,
)
gen = config.generator_config()
train_set = [s for s, _ in generate_dataset(gen, 60, seed=1)]
val_set = [s for s, _ in generate_dataset(gen, 30, seed=2)]
print(f"{len(train_set)} train / {len(val_set)} val samples, "
      f"model has {GroundingModel(config).parameter_count()} parameters\n")

result = train(config, train_set, val_set=val_set, log=print)

print(f"\nbest R@1,IoU>0.5 = {result.best_metric:.2f} "
      f"(epoch {result.best_epoch} of {result.epochs_run})")
report = evaluate_model(result.model, val_set)
print("\nvalidation report:")
print(report.as_text())

# ---------------------------------------------------------------------------
# persistence: the restored model scores identically, bit for bit

with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "demo.ckpt")
    save_checkpoint(path, Checkpoint(
        config=config,
        params=result.model.snapshot(),
        opt_state={k: v.copy() for k, v in result.best_opt_state.items()},
        opt_step=result.best_opt_step,
        epoch=result.best_epoch,
        best_metric=result.best_metric,
    ))
    size = os.path.getsize(path)
    back = load_checkpoint(path)
    revived = GroundingModel(back.config)
    revived.load_state(back.params)
    again = evaluate_model(revived, val_set)
    print(f"\ncheckpoint: {size} bytes, epoch {back.epoch}, "
          f"best {back.best_metric:.2f}")
    print("restored model reproduces the report exactly:",
          again.as_json() == report.as_json())
    same = all(
        np.array_equal(back.params[k], result.model.params.tensors[k].data)
        for k in back.params
    )
    print("parameters bitwise identical:", same)
