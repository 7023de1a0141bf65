"""Open-set evaluation: AUROC, ROC curves, macro-F1, correlation analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibrators import CalibratedOutput
from .data import ActivationSet
from .errors import (
    InsufficientData,
    LengthMismatch,
    SingleClass,
    ValidationError,
    ZeroVariance,
)

UNKNOWN = "unknown"


def _check_binary(scores, positives) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float).ravel()
    positives = np.asarray(positives, dtype=bool).ravel()
    if scores.shape != positives.shape:
        raise LengthMismatch("scores and positives must have the same length")
    if positives.all() or not positives.any():
        raise SingleClass("need at least one positive and one negative")
    return scores, positives


def auroc(scores, positives) -> float:
    """Rank-based AUROC: P(score_pos > score_neg) with ties counted half."""
    scores, positives = _check_binary(scores, positives)
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=float)
    sorted_scores = scores[order]
    # Average ranks over tied groups (1-based).
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    n_pos = int(positives.sum())
    n_neg = n - n_pos
    u = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class RocCurve:
    """Step-function ROC; thresholds descend, (fpr, tpr) runs (0,0) -> (1,1)."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    class_index: int | str


def roc_curve(scores, positives, class_index: int | str = UNKNOWN) -> RocCurve:
    """Threshold sweep over the distinct scores; all samples sharing a score
    change state at the same threshold."""
    scores, positives = _check_binary(scores, positives)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    p = positives[order]
    distinct = np.flatnonzero(np.append(np.diff(s) != 0, True))
    tp = np.cumsum(p)[distinct]
    fp = np.cumsum(~p)[distinct]
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    tpr = np.concatenate(([0.0], tp / n_pos))
    fpr = np.concatenate(([0.0], fp / n_neg))
    thresholds = np.concatenate(([np.inf], s[distinct]))
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc, class_index=class_index)


@dataclass(frozen=True)
class EvaluationReport:
    """Per-run open-set metrics over K known classes plus the unknown class."""

    auroc_unknown: float | None
    macro_f1: float
    per_class_f1: np.ndarray
    roc_curves: dict[int | str, RocCurve | None]
    confusion: np.ndarray
    n_known: int
    n_unknown: int
    undefined_f1_classes: tuple[int, ...] = ()


def _f1_from_confusion(confusion: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    n = confusion.shape[0]
    f1 = np.zeros(n)
    undefined = []
    for c in range(n):
        tp = confusion[c, c]
        denom = confusion[c, :].sum() + confusion[:, c].sum()
        if denom == 0:
            undefined.append(c)  # absent from both truth and predictions
            continue
        f1[c] = 2.0 * tp / denom
    return f1, tuple(undefined)


def evaluate(
    outputs: list[CalibratedOutput],
    true_labels,
    unknown_scores=None,
) -> EvaluationReport:
    """Score a batch of calibrated outputs against ground truth.

    Unknown-detection AUROC uses each output's unknown-class probability
    unless ``unknown_scores`` overrides it (the softmax baseline needs
    1 - max probability to have a non-degenerate curve). True label -1 maps
    to the unknown slot K.
    """
    true_labels = np.asarray(true_labels, dtype=int).ravel()
    if len(outputs) != len(true_labels):
        raise LengthMismatch("outputs and true_labels must have the same length")
    if not outputs:
        raise ValidationError("need at least one output")
    k = outputs[0].num_classes
    if any(o.num_classes != k for o in outputs):
        raise ValidationError("all outputs must share one class count")
    if true_labels.max() >= k or true_labels.min() < -1:
        raise ValidationError("true labels must lie in [-1, K-1]")

    probs = np.vstack([o.probabilities for o in outputs])
    preds = np.array([o.predicted for o in outputs])
    truth = np.where(true_labels < 0, k, true_labels)

    confusion = np.zeros((k + 1, k + 1), dtype=np.int64)
    np.add.at(confusion, (truth, preds), 1)
    per_class_f1, undefined = _f1_from_confusion(confusion)
    macro_f1 = float(per_class_f1.mean())

    if unknown_scores is None:
        unknown_scores = probs[:, k]
    unknown_scores = np.asarray(unknown_scores, dtype=float).ravel()
    if unknown_scores.shape[0] != len(outputs):
        raise LengthMismatch("unknown_scores must match outputs")

    curves: dict[int | str, RocCurve | None] = {}
    for j in range(k):
        pos = truth == j
        curves[j] = roc_curve(probs[:, j], pos, j) if pos.any() and not pos.all() else None
    unknown_pos = truth == k
    auroc_unknown = None
    if unknown_pos.any() and not unknown_pos.all():
        curves[UNKNOWN] = roc_curve(unknown_scores, unknown_pos, UNKNOWN)
        auroc_unknown = auroc(unknown_scores, unknown_pos)
    else:
        curves[UNKNOWN] = None

    return EvaluationReport(
        auroc_unknown=auroc_unknown,
        macro_f1=macro_f1,
        per_class_f1=per_class_f1,
        roc_curves=curves,
        confusion=confusion,
        n_known=int((truth < k).sum()),
        n_unknown=int(unknown_pos.sum()),
        undefined_f1_classes=undefined,
    )


def activation_distance_correlation(
    train: ActivationSet, target_class: int, probe_class: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Pearson correlation, over the target class's rows, between the probe
    column's activation and the euclidean distance to the class mean.

    Returns (correlation, activations, distances) so callers can export the
    scatter pairs.
    """
    if not 0 <= probe_class < train.num_classes:
        raise ValidationError(f"probe class {probe_class} out of range")
    rows = train.class_rows(target_class)
    if rows.shape[0] < 3:
        raise InsufficientData(
            f"class {target_class} has {rows.shape[0]} rows, need at least 3"
        )
    mav = rows.mean(axis=0)
    dists = np.linalg.norm(rows - mav, axis=1).astype(float)
    acts = rows[:, probe_class].astype(float)
    if np.ptp(acts) == 0 or np.ptp(dists) == 0:
        raise ZeroVariance("constant activation or distance column")
    corr = float(np.corrcoef(acts, dists)[0, 1])
    return corr, acts, dists
