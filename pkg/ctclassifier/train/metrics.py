"""
Classification metrics: confusion matrix, accuracy, precision, recall, F1 and AUC.

COVID (label 1) is the positive class. Zero-denominator conventions:
precision = 0 when tp + fp = 0, recall = 0 when tp + fn = 0, f1 = 0 when P + R = 0.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ctclassifier.errors import UndefinedMetricError

METRIC_KEYS = ("accuracy", "precision", "recall", "f1", "auc", "loss")
COUNT_KEYS = ("tp", "tn", "fp", "fn")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in COUNT_KEYS:
            if getattr(self, name) < 0:
                raise ValueError(f"confusion count {name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_predictions(cls, y_true: Sequence[int], y_pred: Sequence[int]) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise ValueError(f"label and prediction counts differ: {y_true.shape} vs {y_pred.shape}")
        return cls(
            tp=int(np.sum((y_true == 1) & (y_pred == 1))),
            tn=int(np.sum((y_true == 0) & (y_pred == 0))),
            fp=int(np.sum((y_true == 0) & (y_pred == 1))),
            fn=int(np.sum((y_true == 1) & (y_pred == 0))),
        )


def accuracy(cm: ConfusionMatrix) -> float:
    """(TP + TN) / (TP + FP + TN + FN)"""
    if cm.total == 0:
        raise UndefinedMetricError("accuracy of an empty confusion matrix is undefined")
    return (cm.tp + cm.tn) / cm.total


def precision(cm: ConfusionMatrix) -> float:
    denominator = cm.tp + cm.fp
    return cm.tp / denominator if denominator else 0.0


def recall(cm: ConfusionMatrix) -> float:
    denominator = cm.tp + cm.fn
    return cm.tp / denominator if denominator else 0.0


def f1_score(p: float, r: float) -> float:
    """Harmonic mean of precision and recall."""
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def compute_auc(scores: Iterable[Tuple[float, int]]) -> float:
    """
    Probability that a random positive outranks a random negative, ties
    counting one half (equal to the trapezoidal ROC area).

    Raises:
        UndefinedMetricError: only one class present
    """
    pairs = list(scores)
    probs = np.array([p for p, _ in pairs], dtype=np.float64)
    labels = np.array([y for _, y in pairs], dtype=np.int64)
    positives = probs[labels == 1]
    negatives = np.sort(probs[labels == 0])
    if positives.size == 0 or negatives.size == 0:
        raise UndefinedMetricError("AUC undefined: both classes must be present")

    below = np.searchsorted(negatives, positives, side="left")
    not_above = np.searchsorted(negatives, positives, side="right")
    # wins count 2, ties count 1, halved once at the end to keep the sum integral
    doubled = int(np.sum(2 * below + (not_above - below)))
    return doubled / (2 * positives.size * negatives.size)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: Optional[float]
    confusion: ConfusionMatrix
    loss: float

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix, auc: Optional[float], loss: float) -> "MetricsReport":
        p = precision(cm)
        r = recall(cm)
        return cls(accuracy(cm), p, r, f1_score(p, r), auc, cm, loss)

    def to_lines(self) -> List[str]:
        """key value lines: reals at 6 decimals, counts as integers; auc omitted when undefined."""
        lines = []
        for key in METRIC_KEYS:
            value = getattr(self, key)
            if value is None:
                continue
            lines.append(f"{key} {value:.6f}")
        for key in COUNT_KEYS:
            lines.append(f"{key} {getattr(self.confusion, key)}")
        return lines

    def to_text(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    def to_dict(self) -> Dict[str, Union[float, int, None]]:
        values: Dict[str, Union[float, int, None]] = {key: getattr(self, key) for key in METRIC_KEYS}
        values.update({key: getattr(self.confusion, key) for key in COUNT_KEYS})
        return values

    @classmethod
    def from_text(cls, text: str) -> "MetricsReport":
        values: Dict[str, str] = {}
        for line in text.splitlines():
            if line.strip():
                key, _, value = line.strip().partition(" ")
                values[key] = value.strip()
        cm = ConfusionMatrix(*(int(values[key]) for key in COUNT_KEYS))
        auc = float(values["auc"]) if "auc" in values else None
        return cls(
            float(values["accuracy"]), float(values["precision"]), float(values["recall"]),
            float(values["f1"]), auc, cm, float(values["loss"]),
        )


def load_metrics_report(path: Union[str, Path]) -> MetricsReport:
    return MetricsReport.from_text(Path(path).read_text(encoding="utf-8"))
