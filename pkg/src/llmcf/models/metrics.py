"""Binary classification metrics with positive class 1."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .. import errors
from ..schema import Dataset

REPORT_FIELDS = ("accuracy", "precision", "recall", "f1", "auc")


@dataclass(frozen=True)
class ClassReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float

    def as_dict(self) -> dict:
        return asdict(self)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted as 1/2."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise errors.SingleClass("AUC needs both classes present")
    ranks = rankdata(s)  # average ranks handle ties
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def report_from_predictions(labels, predictions, scores=None) -> ClassReport:
    y = np.asarray(labels, dtype=int)
    p = np.asarray(predictions, dtype=int)
    if len(y) == 0:
        raise errors.EmptyDataset("cannot score an empty test set")
    tp = int(((p == 1) & (y == 1)).sum())
    fp = int(((p == 1) & (y == 0)).sum())
    fn = int(((p == 0) & (y == 1)).sum())
    accuracy = float((p == y).mean())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    if scores is None:
        scores = p
    area = auc(scores, y) if 0 < y.sum() < len(y) else float("nan")
    return ClassReport(accuracy, float(precision), float(recall), float(f1), area)


def classification_report(model, test_set: Dataset) -> ClassReport:
    if len(test_set) == 0:
        raise errors.EmptyDataset("cannot score an empty test set")
    labels, scores = model.predict_many(test_set.rows)
    return report_from_predictions(test_set.labels, labels, scores)
