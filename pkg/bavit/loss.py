"""Accumulative cross-entropy: per-token CE averaged over all B×M tokens.

Class index 0 is background and 1 is foreground everywhere in the package.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from bavit.errors import NumericError, ShapeError
from bavit.net import softmax

PROB_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class LossValue:
    value: float
    per_token: np.ndarray  # B×M negative log-likelihoods


def softmax_tokens(logits: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(logits)):
        raise NumericError("softmax_tokens: logits contain NaN or inf")
    return softmax(logits, axis=-1)


def _check_labels(labels: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != shape:
        raise ShapeError(f"labels shape {labels.shape} does not match predictions {shape}")
    if labels.size and (labels.min() < 0 or labels.max() > 1):
        raise ShapeError("labels must be 0 (BG) or 1 (FG)")
    if not np.all(labels == np.round(labels)):
        raise ShapeError("labels must be integers 0 or 1")
    return labels.astype(np.int64)


def _token_weights(labels, class_weights):
    if class_weights is None:
        return None
    return np.asarray(class_weights, dtype=np.float64)[labels]


def accumulative_ce(
    probs: np.ndarray,
    labels: np.ndarray,
    class_weights: Optional[Tuple[float, float]] = None,
) -> LossValue:
    """-(1/(B·M)) Σ log p(true class), probabilities floored at 1e-12."""
    labels = _check_labels(labels, probs.shape[:-1])
    p_true = np.take_along_axis(probs, labels[..., None], axis=-1)[..., 0]
    nll = -np.log(np.maximum(p_true, PROB_FLOOR))
    weights = _token_weights(labels, class_weights)
    if weights is not None:
        nll = nll * weights
    return LossValue(float(nll.mean()) if nll.size else 0.0, nll)


def accumulative_ce_grad(
    logits: np.ndarray,
    labels: np.ndarray,
    class_weights: Optional[Tuple[float, float]] = None,
) -> np.ndarray:
    """d L_acc / d logits = (softmax(logits) - onehot(labels)) / (B·M)."""
    labels = _check_labels(labels, logits.shape[:-1])
    grad = softmax_tokens(logits)
    np.put_along_axis(
        grad,
        labels[..., None],
        np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0,
        axis=-1,
    )
    weights = _token_weights(labels, class_weights)
    if weights is not None:
        grad = grad * weights[..., None].astype(grad.dtype)
    return grad / max(labels.size, 1)
