"""Temporal sentence grounding with motion/appearance reasoning, built on a
self-contained float64 autodiff core."""

from .tensor import ShapeError, Tensor, check_finite, no_grad

__version__ = "0.1.0"

__all__ = ["Tensor", "ShapeError", "no_grad", "check_finite", "__version__"]
