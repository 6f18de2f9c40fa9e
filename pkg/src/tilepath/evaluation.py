"""ROC sweep, AUC, Youden's index, rates at a threshold, confusion matrices.

A sample is predicted positive at threshold ``t`` iff ``score >= t``.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, DimensionError, UndefinedRateError

REPORT_KEYS = ("auc", "youden_j", "best_threshold", "acc", "sen", "spe")


def _scored(scores, positive) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).ravel()
    p = np.asarray(positive).astype(bool).ravel()
    if s.shape != p.shape:
        raise DimensionError(f"{s.size} scores but {p.size} labels")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    if p.all() or not p.any():
        raise UndefinedRateError("need at least one positive and one negative sample")
    return s, p


@dataclass
class RocAnalysis:
    """ROC points ordered from the strictest threshold (+inf) to the loosest."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float
    youden_j: float
    best_threshold: float
    acc: float
    sen: float
    spe: float

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in REPORT_KEYS}

    def points_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "tpr", "fpr"])
        for t, tp, fp in zip(self.thresholds, self.tpr, self.fpr):
            w.writerow([repr(float(t)), repr(float(tp)), repr(float(fp))])
        return buf.getvalue()


def roc_points(scores, positive) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s, p = _scored(scores, positive)
    order = np.argsort(-s, kind="stable")
    s, p = s[order], p[order]
    tp = np.cumsum(p)
    fp = np.cumsum(~p)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    thresholds = np.r_[np.inf, s[ends]]
    tpr = np.r_[0.0, tp[ends] / tp[-1]]
    fpr = np.r_[0.0, fp[ends] / fp[-1]]
    return thresholds, tpr, fpr


def trapezoid_auc(fpr, tpr) -> float:
    fpr, tpr = np.asarray(fpr, float), np.asarray(tpr, float)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def youden_best_threshold(roc: RocAnalysis) -> tuple[float, float]:
    """Maximum of TPR - FPR and its threshold; ties (within 1e-12) go to the higher threshold.

    The +inf sentinel is never returned: its J of 0 is matched by the loosest
    threshold, where TPR = FPR = 1.
    """
    j = roc.tpr[1:] - roc.fpr[1:]
    # J values within rounding noise of the maximum count as ties
    k = int(np.flatnonzero(j >= j.max() - 1e-12)[0])
    return float(j[k]), float(roc.thresholds[1:][k])


def acc_sen_spe(scores, positive, threshold: float) -> tuple[float, float, float]:
    s, p = _scored(scores, positive)
    pred = s >= threshold
    tp = np.sum(pred & p)
    tn = np.sum(~pred & ~p)
    sen = tp / np.sum(p)
    spe = tn / np.sum(~p)
    return float((tp + tn) / s.size), float(sen), float(spe)


def roc_curve(scores, positive) -> RocAnalysis:
    """Full ROC analysis of positive-class ``scores`` against boolean ``positive``."""
    thresholds, tpr, fpr = roc_points(scores, positive)
    roc = RocAnalysis(thresholds, tpr, fpr, trapezoid_auc(fpr, tpr), 0.0, float("nan"), 0.0, 0.0, 0.0)
    roc.youden_j, roc.best_threshold = youden_best_threshold(roc)
    roc.acc, roc.sen, roc.spe = acc_sen_spe(scores, positive, roc.best_threshold)
    return roc


def confusion_matrix(predictions: Sequence[int], actuals: Sequence[int], k: int) -> np.ndarray:
    """K x K counts; rows are actual classes, columns predicted classes."""
    pred = np.asarray(predictions, dtype=np.int64).ravel()
    act = np.asarray(actuals, dtype=np.int64).ravel()
    if pred.shape != act.shape:
        raise DimensionError(f"{pred.size} predictions but {act.size} actual labels")
    for name, arr in (("prediction", pred), ("actual", act)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise DataError(f"{name} class index out of range for K={k}")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (act, pred), 1)
    return cm


class NormalizedConfusion(NamedTuple):
    matrix: np.ndarray
    empty_rows: np.ndarray  # True where the actual class had no samples


def normalize_confusion(cm) -> NormalizedConfusion:
    counts = np.asarray(cm, dtype=float)
    sums = counts.sum(axis=1, keepdims=True)
    empty = sums[:, 0] == 0
    out = np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)
    return NormalizedConfusion(out, empty)


def confusion_csv(matrix, class_names: Sequence[str]) -> str:
    matrix = np.asarray(matrix)
    fmt = int if matrix.dtype.kind in "iu" else (lambda v: repr(float(v)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["actual/predicted", *class_names])
    for name, row in zip(class_names, matrix):
        w.writerow([name, *(fmt(v) for v in row)])
    return buf.getvalue()


def read_scored_csv(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read ``score,label`` rows; label is 1/0 or positive/negative. A header row is skipped."""
    scores, labels = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                score = float(row[0])
            except ValueError:
                if lineno == 1:
                    continue
                raise DataError(f"{path}:{lineno}: bad score {row[0]!r}")
            tag = row[1].strip().lower()
            if tag in ("1", "positive", "pos", "true"):
                labels.append(True)
            elif tag in ("0", "negative", "neg", "false"):
                labels.append(False)
            else:
                raise DataError(f"{path}:{lineno}: bad label {row[1]!r}")
            scores.append(score)
    return np.array(scores), np.array(labels, dtype=bool)
