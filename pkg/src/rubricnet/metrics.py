"""Macro-averaged ordinal classification metrics.

Both metrics average per-class figures over the classes present in the
true labels, which neutralizes class imbalance; classes never observed in
the truth are excluded from the mean.
"""

from dataclasses import dataclass

import numpy as np


def _check_levels(pred, true, k: int) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=int)
    true = np.asarray(true, dtype=int)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError(f"prediction/truth shape mismatch: {pred.shape} vs {true.shape}")
    for name, levels in (("predicted", pred), ("true", true)):
        if levels.size and (levels.min() < 1 or levels.max() > k):
            raise ValueError(f"{name} levels outside [1, {k}]")
    return pred, true


def macro_accuracy(pred, true, k: int) -> float:
    """Mean per-class recall over the classes present in the truth."""
    pred, true = _check_levels(pred, true, k)
    recalls = []
    for cls in range(1, k + 1):
        mask = true == cls
        if mask.any():
            recalls.append(float((pred[mask] == cls).mean()))
    if not recalls:
        raise ValueError("no samples to score")
    return float(np.mean(recalls))


def macro_mse(pred, true, k: int) -> float:
    """Mean over classes present of the class-conditional squared level error."""
    pred, true = _check_levels(pred, true, k)
    errors = []
    for cls in range(1, k + 1):
        mask = true == cls
        if mask.any():
            diff = pred[mask].astype(float) - cls
            errors.append(float((diff * diff).mean()))
    if not errors:
        raise ValueError("no samples to score")
    return float(np.mean(errors))


def confusion_matrix(pred, true, k: int) -> np.ndarray:
    """K x K counts; entry (i, j) is how often true level i+1 got predicted j+1."""
    pred, true = _check_levels(pred, true, k)
    matrix = np.zeros((k, k), dtype=int)
    np.add.at(matrix, (true - 1, pred - 1), 1)
    return matrix


@dataclass(frozen=True)
class EvalResult:
    """Macro metrics plus the confusion matrix for one evaluation."""

    macro_accuracy: float
    macro_mse: float
    confusion: np.ndarray


def evaluate_levels(pred, true, k: int) -> EvalResult:
    return EvalResult(
        macro_accuracy=macro_accuracy(pred, true, k),
        macro_mse=macro_mse(pred, true, k),
        confusion=confusion_matrix(pred, true, k),
    )
