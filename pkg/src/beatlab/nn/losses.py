"""Loss functions: class-weighted cross-entropy and masked mean squared
error.  Both exclude padded positions from the gradient by construction."""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError, ShapeError
from .tensor import Tensor


def weighted_cross_entropy(logits: Tensor, labels, class_weights) -> Tensor:
    """Mean over the batch of -w[label] * log softmax(logits)[label].

    `class_weights` indexes by label; the positive-class weight is how the
    TD/ASD imbalance is compensated.
    """
    labels = np.asarray(labels, dtype=np.intp)
    weights = np.asarray(class_weights, dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("class weights must be positive")
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"logits {logits.shape} incompatible with labels {labels.shape}")
    if not np.all(np.isfinite(logits.data)):
        raise NumericalError("non-finite logits in cross-entropy")
    batch = logits.shape[0]
    log_probs = logits.log_softmax(axis=-1)
    picked = log_probs[np.arange(batch), labels]
    w = Tensor(weights[labels])
    return -(w * picked).sum() * (1.0 / batch)


def masked_mse(pred: Tensor, target, step_mask=None) -> Tensor:
    """Mean squared error over unmasked steps of (B, T, C) sequences.

    Padded steps (mask false) contribute exactly zero to the value and the
    gradient; the mean divides by the number of real elements only.
    """
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - Tensor(target)
    if step_mask is not None:
        mask = np.asarray(step_mask, dtype=np.float64)
        if mask.shape != pred.shape[:2]:
            raise ShapeError(f"mask {mask.shape} vs sequence {pred.shape[:2]}")
        diff = diff * Tensor(mask[:, :, None])
        n = mask.sum() * pred.shape[-1]
    else:
        n = pred.size
    if n == 0:
        raise ShapeError("mask excludes every element")
    return (diff * diff).sum() * (1.0 / n)
