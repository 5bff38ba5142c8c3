"""Classification metrics: accuracy, F1, macro-F1, ROC/AUC, confusion matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def accuracy(preds, labels):
    preds, labels = np.asarray(preds), np.asarray(labels)
    if len(preds) != len(labels):
        raise ValueError("preds and labels must have equal length")
    if len(preds) == 0:
        raise ValueError("cannot compute accuracy of empty input")
    return float((preds == labels).mean())


def f1_binary(preds, labels, positive_class=1):
    preds, labels = np.asarray(preds), np.asarray(labels)
    if len(preds) != len(labels):
        raise ValueError("preds and labels must have equal length")
    if len(preds) == 0:
        raise ValueError("cannot compute F1 of empty input")
    tp = int(((preds == positive_class) & (labels == positive_class)).sum())
    fp = int(((preds == positive_class) & (labels != positive_class)).sum())
    fn = int(((preds != positive_class) & (labels == positive_class)).sum())
    if tp == 0 and (fp > 0 or fn > 0):
        return 0.0
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return float(2 * precision * recall / (precision + recall))


def confusion_matrix(preds, labels, n_classes):
    preds, labels = np.asarray(preds), np.asarray(labels)
    if len(preds) and (preds.min() < 0 or preds.max() >= n_classes):
        raise ValueError("prediction out of class range")
    if len(labels) and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError("label out of class range")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    for lab, pred in zip(labels, preds):
        m[lab, pred] += 1
    return m


def macro_f1(preds, labels, n_classes):
    """Unweighted mean of one-vs-rest F1; absent classes contribute 0."""
    preds, labels = np.asarray(preds), np.asarray(labels)
    if len(preds) == 0:
        raise ValueError("cannot compute macro-F1 of empty input")
    scores = []
    for c in range(n_classes):
        scores.append(f1_binary((preds == c).astype(int), (labels == c).astype(int), 1))
    return float(np.mean(scores))


def roc_auc(scores, labels):
    """ROC staircase and trapezoid AUC; equal scores are grouped into one step."""
    scores, labels = np.asarray(scores, dtype=np.float64), np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")

    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and scores[j] == scores[i]:
            j += 1
        tp += int((labels[i:j] == 1).sum())
        fp += int((labels[i:j] == 0).sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, float(auc)


@dataclass
class MetricsReport:
    """Evaluation results for one grid cell, aggregated over seeds."""

    task: str  # "binary" | "multiclass"
    config: dict  # variant, density metric, threshold rule, input mode, hidden, lr
    accuracy_mean: float
    accuracy_std: float
    f1_mean: float
    f1_std: float
    confusion: np.ndarray
    roc_points: list = field(default_factory=list)
    auc: float | None = None

    def to_dict(self):
        return {
            "task": self.task,
            "config": self.config,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "confusion": self.confusion.tolist(),
            "roc_points": [list(p) for p in self.roc_points],
            "auc": self.auc,
        }
