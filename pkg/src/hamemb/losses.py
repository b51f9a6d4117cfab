"""Softmax + base-2 cross-entropy head applied to readout probabilities."""
from __future__ import annotations

import numpy as np

from .errors import LabelOutOfRange

LN2 = np.log(2.0)


def softmax(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    e = np.exp(p - np.max(p, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def _check_labels(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise LabelOutOfRange(f"labels must lie in [0, {n_classes})")
    return labels


def cross_entropy(q: np.ndarray, label) -> np.ndarray:
    """``-log2 q[label]`` for one-hot targets; vectorised over leading axes."""
    q = np.asarray(q, dtype=np.float64)
    label = _check_labels(label, q.shape[-1])
    picked = np.take_along_axis(q, np.expand_dims(label, -1), axis=-1)[..., 0]
    return -np.log2(picked)


def head_loss_and_grad(probs: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss ``-log2 softmax(p)[y]`` and its gradient with respect to ``p``."""
    labels = _check_labels(labels, probs.shape[-1])
    q = softmax(probs)
    loss = cross_entropy(q, labels)
    g = q.copy()
    np.put_along_axis(g, np.expand_dims(labels, -1),
                      np.take_along_axis(g, np.expand_dims(labels, -1), -1) - 1.0, -1)
    return loss, g / LN2
