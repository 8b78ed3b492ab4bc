"""
Categorical cross-entropy over softmax probabilities.
"""

from typing import Sequence, Tuple

import numpy as np

from ctclassifier.errors import LabelError, ShapeError
from ctclassifier.tensor.core import Tensor

PROB_CLAMP = 1e-12


def one_hot(labels: Sequence[int], num_classes: int = 2, dtype=np.float64) -> Tensor:
    """Encode integer class labels as an N x K one-hot tensor."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise LabelError(f"labels must be a flat sequence, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f"labels must lie in [0, {num_classes}), got {sorted(set(labels.tolist()))}")
    encoded = np.zeros((labels.size, num_classes), dtype=dtype)
    encoded[np.arange(labels.size), labels] = 1
    return encoded


def cross_entropy_loss(probs: Tensor, labels: Tensor) -> Tuple[float, Tensor]:
    """
    Mean negative log-probability of the true class.

    Args:
        probs: N x K softmax output (rows sum to 1)
        labels: N x K one-hot targets

    Returns:
        Tuple of (loss, gradient w.r.t. the softmax logits = (probs - labels) / N)
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape != labels.shape:
        raise ShapeError(f"cross-entropy expects matching N x K tensors, got {probs.shape} and {labels.shape}")
    if probs.shape[0] == 0:
        raise ShapeError("cross-entropy needs at least one row")
    is_binary = np.all((labels == 0) | (labels == 1))
    if not is_binary or np.any(labels.sum(axis=1) != 1):
        raise LabelError("labels must be one-hot: exactly one 1 per row, zeros elsewhere")

    n = probs.shape[0]
    p_true = np.clip(probs[labels.astype(bool)], PROB_CLAMP, 1.0)
    loss = float(-np.mean(np.log(p_true)))
    grad_logits = (probs - labels.astype(probs.dtype)) / n
    return loss, grad_logits
