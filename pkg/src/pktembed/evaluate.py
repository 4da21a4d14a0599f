"""ROC and Precision/Recall curves, AUCs, and threshold operating points.

Thresholds are the unique scores in descending order; a row is predicted
positive when its score is >= the threshold, and tied scores collapse into
one threshold step. The ROC curve is prefixed with (0, 0) and the PR curve
with the conventional (recall=0, precision=1) endpoint; both AUCs use the
trapezoidal rule.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .validation import check_scores_labels


class OperatingPoint(NamedTuple):
    precision: float
    recall: float
    threshold: float
    f1: float


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


@dataclass
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray
    auc: float


@dataclass
class EvaluationCurves:
    roc: RocCurve
    pr: PrCurve
    operating_points: list

    @property
    def auc_roc(self) -> float:
        return self.roc.auc

    @property
    def auc_pr(self) -> float:
        return self.pr.auc


def _trapezoid(x, y) -> float:
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1])) / 2.0)


def _threshold_counts(scores, labels):
    """Cumulative true/false positive counts at each unique descending
    score."""
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    # Last index of each tied group = counts with score >= that value.
    boundary = np.nonzero(np.diff(s))[0]
    last = np.concatenate([boundary, [s.size - 1]])
    tp = np.cumsum(y)[last].astype(np.float64)
    fp = (last + 1) - tp
    return s[last], tp, fp


def roc_curve(scores, labels) -> RocCurve:
    """ROC points and trapezoidal AUC; needs both classes present."""
    scores, labels = check_scores_labels(scores, labels)
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs at least one positive and one negative")
    thr, tp, fp = _threshold_counts(scores, labels)
    fpr = np.concatenate([[0.0], fp / neg])
    tpr = np.concatenate([[0.0], tp / pos])
    thresholds = np.concatenate([[np.inf], thr])
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds,
                    auc=_trapezoid(fpr, tpr))


def pr_curve(scores, labels) -> PrCurve:
    """Precision/Recall points with the (0, 1) endpoint prepended."""
    scores, labels = check_scores_labels(scores, labels)
    pos = int(labels.sum())
    if pos == 0:
        raise ValueError("PR curve needs at least one positive")
    thr, tp, fp = _threshold_counts(scores, labels)
    recall = np.concatenate([[0.0], tp / pos])
    precision = np.concatenate([[1.0], tp / (tp + fp)])
    thresholds = np.concatenate([[np.inf], thr])
    return PrCurve(recall=recall, precision=precision, thresholds=thresholds,
                   auc=_trapezoid(recall, precision))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def operating_points(scores, labels, thresholds) -> list:
    """Precision, recall and F1 at each threshold (predict 1 iff
    score >= threshold)."""
    scores, labels = check_scores_labels(scores, labels)
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    if thresholds.size == 0:
        raise ValueError("thresholds must be nonempty")
    pos = int(labels.sum())
    points = []
    for thr in thresholds:
        pred = scores >= thr
        tp = int((pred & (labels == 1)).sum())
        fp = int((pred & (labels == 0)).sum())
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / pos if pos else 0.0
        points.append(OperatingPoint(precision=precision, recall=recall,
                                     threshold=float(thr),
                                     f1=f1_score(precision, recall)))
    return points


def evaluate_scores(scores, labels, thresholds=None) -> EvaluationCurves:
    """Both curves plus operating points (at all unique score thresholds
    unless given)."""
    roc = roc_curve(scores, labels)
    pr = pr_curve(scores, labels)
    if thresholds is None:
        thresholds = roc.thresholds[1:]
    return EvaluationCurves(roc=roc, pr=pr,
                            operating_points=operating_points(
                                scores, labels, thresholds))


def write_roc_csv(curve: RocCurve, path):
    _write_curve(path, curve.thresholds, curve.fpr, curve.tpr)


def write_pr_csv(curve: PrCurve, path):
    _write_curve(path, curve.thresholds, curve.recall, curve.precision)


def _write_curve(path, thresholds, x, y):
    lines = [f"{t:.10g},{a:.10g},{b:.10g}\n"
             for t, a, b in zip(thresholds, x, y)]
    Path(path).write_text("".join(lines))


def summary_line(auc_roc: float, auc_pr: float) -> str:
    """Machine-parsable one-line AUC summary."""
    return f"auc_roc={auc_roc:.6f},auc_pr={auc_pr:.6f}"
