"""Binary classification metrics: confusion counts, rates, ROC/AUC and AP.

A ratio whose denominator is zero evaluates to :data:`UNDEFINED` rather than
NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise MetricError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _binary(name, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise MetricError(f"{name} must be one-dimensional")
    if not np.all((x == 0) | (x == 1)):
        raise MetricError(f"{name} must contain only 0 and 1")
    return x.astype(bool)


def confusion(labels, predictions) -> ConfusionCounts:
    y = _binary("labels", labels)
    p = _binary("predictions", predictions)
    if len(y) != len(p):
        raise MetricError(f"{len(y)} labels but {len(p)} predictions")
    if len(y) == 0:
        raise MetricError("need at least one prediction")
    return ConfusionCounts(tp=int(np.sum(y & p)), fp=int(np.sum(~y & p)),
                           tn=int(np.sum(~y & ~p)), fn=int(np.sum(y & ~p)))


def _ratio(num: int, den: int):
    return num / den if den > 0 else UNDEFINED


def accuracy(c: ConfusionCounts):
    return _ratio(c.tp + c.tn, c.total)


def precision(c: ConfusionCounts):
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts):
    return _ratio(c.tp, c.tp + c.fn)


tpr = recall


def fpr_over_errors(c: ConfusionCounts):
    """FP / (FP + FN): the share of all errors that are false positives."""
    return _ratio(c.fp, c.fp + c.fn)


def fpr_conventional(c: ConfusionCounts):
    """FP / (FP + TN), the rate used on the ROC x-axis."""
    return _ratio(c.fp, c.fp + c.tn)


def tpr_fpr(c: ConfusionCounts):
    return tpr(c), fpr_conventional(c)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


def _ranked_counts(labels, scores):
    """Cumulative (tp, fp) after each distinct score, scanning scores high to low."""
    y = _binary("labels", labels)
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise MetricError(f"{len(y)} labels but {len(s)} scores")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(s[1:] != s[:-1])[0], len(s) - 1] if len(s) else np.zeros(0, int)
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    return tp, fp, s[last]


def roc_curve(labels, scores) -> RocCurve:
    tp, fp, thr = _ranked_counts(labels, scores)
    pos, neg = (tp[-1], fp[-1]) if len(tp) else (0, 0)
    if pos == 0 or neg == 0:
        raise MetricError("ROC needs both positive and negative labels")
    return RocCurve(fpr=np.r_[0.0, fp / neg], tpr=np.r_[0.0, tp / pos], thresholds=np.r_[np.inf, thr])


def roc_auc(labels, scores) -> tuple[RocCurve, float]:
    """ROC curve over distinct score thresholds and its trapezoid-rule area.

    The area is accumulated in integer counts and divided once, so it equals
    the fraction of concordant positive/negative pairs (ties count one half).
    """
    curve = roc_curve(labels, scores)
    tp, fp, _ = _ranked_counts(labels, scores)
    tp = np.r_[0, tp].astype(np.int64)
    fp = np.r_[0, fp].astype(np.int64)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    return curve, twice_area / (2.0 * int(tp[-1]) * int(fp[-1]))


def auc_score(labels, scores) -> float:
    return roc_auc(labels, scores)[1]


def average_precision(labels, scores) -> float:
    """Step integral of precision over recall on the ranked list.

    Tied scores form a single threshold.
    """
    tp, fp, _ = _ranked_counts(labels, scores)
    if len(tp) == 0 or tp[-1] == 0:
        raise MetricError("average precision needs at least one positive label")
    prec = tp / (tp + fp)
    d_recall = np.diff(np.r_[0, tp]) / tp[-1]
    return float(np.sum(d_recall * prec))


def multiclass_accuracy(labels, predictions) -> float:
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.shape != predictions.shape or labels.size == 0:
        raise MetricError("labels and predictions must be nonempty and equally long")
    return float(np.mean(labels == predictions))
