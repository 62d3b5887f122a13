"""A tour of the tensor core: building graphs, backward passes, and the
numerical checks that keep every gradient honest.

Run:  python3 demos/autodiff_walkthrough.py
"""

import numpy as np

from motionground import tensor as tg
from motionground.gradcheck import check_op, numeric_grad
from motionground.tensor import Tensor

rng = np.random.default_rng(7)

# ---------------------------------------------------------------------------
# 1. a tiny expression graph

x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
b = Tensor(np.zeros(2), requires_grad=True)

y = tg.tanh(x @ w + b)
loss = (y * y).mean()
print("forward value:", f"{loss.item():.6f}")

loss.backward()
print("grad shapes:  ", x.grad.shape, w.grad.shape, b.grad.shape)

# ---------------------------------------------------------------------------
# 2. the same gradient by central differences

def same_loss(ts):
    out = tg.tanh(ts[0] @ ts[1] + ts[2])
    return (out * out).mean()

num = numeric_grad(same_loss, [x, w, b], wrt=1)
print("worst |analytic - numeric| for w:",
      f"{np.max(np.abs(w.grad - num)):.2e}")

# ---------------------------------------------------------------------------
# 3. check_op wraps that comparison for any scalar-valued function

err = check_op(lambda ts: tg.softmax(ts[0], axis=1).sum(axis=0)[0], [x])
print("softmax column readout, max relative error:", f"{err:.2e}")

# ---------------------------------------------------------------------------
# 4. gradients accumulate until cleared, and no_grad suspends taping

x.zero_grad()
(x.sum() * 2.0).backward()
(x.sum() * 3.0).backward()
print("accumulated grad entry (2 + 3):", x.grad[0, 0])

with tg.no_grad():
    silent = tg.relu(x) @ w
print("taped under no_grad?", silent.requires_grad)

# ---------------------------------------------------------------------------
# 5. reductions, slicing, and broadcasting all flow gradients

m = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
picked = m[1:4].mean(axis=0)
(picked * Tensor(np.array([1.0, -2.0, 0.5]))).sum().backward()
print("rows outside the slice stay zero:",
      bool(np.all(m.grad[0] == 0) and np.all(m.grad[4] == 0)))
print("rows inside share the mean weight:", m.grad[2])
