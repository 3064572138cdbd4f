"""Balanced error, misclassification error and per-class / per-group breakdowns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MANY, MEDIUM, FEW = "Many", "Medium", "Few"


@dataclass
class EvalReport:
    balanced_error: float
    misclassification_error: float
    per_class_errors: np.ndarray
    n_per_class: np.ndarray
    per_group_errors: dict | None = None
    missing_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "balanced_error": self.balanced_error,
            "misclassification_error": self.misclassification_error,
            "per_class_errors": [None if np.isnan(e) else float(e) for e in self.per_class_errors],
            "n_per_class": self.n_per_class.tolist(),
            "missing_classes": list(self.missing_classes),
        }
        if self.per_group_errors is not None:
            d["per_group_errors"] = dict(self.per_group_errors)
        return d


def evaluate(preds, truth, num_classes: int, groups=None) -> EvalReport:
    """Error rates of ``preds`` against ``truth``.

    Classes absent from ``truth`` have an undefined (NaN) per-class error,
    are left out of the balanced error and listed in ``missing_classes``.
    ``groups`` optionally maps each class to a group name; the group error
    pools every evaluation example of the group's classes.
    """
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1 or preds.size < 1:
        raise ValueError("preds and truth must be equal-length, non-empty vectors")
    for arr in (preds, truth):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ValueError("label out of range")
    wrong = preds != truth
    n = np.bincount(truth, minlength=num_classes)
    errs = np.bincount(truth, weights=wrong, minlength=num_classes)
    present = n > 0
    per_class = np.full(num_classes, np.nan)
    per_class[present] = errs[present] / n[present]
    report = EvalReport(
        balanced_error=float(per_class[present].mean()),
        misclassification_error=float(wrong.mean()),
        per_class_errors=per_class,
        n_per_class=n,
        missing_classes=np.flatnonzero(~present).tolist(),
    )
    if groups is not None:
        groups = np.asarray(groups)
        report.per_group_errors = {}
        for name in dict.fromkeys(groups.tolist()):
            members = groups == name
            count = n[members].sum()
            if count:
                report.per_group_errors[name] = float(errs[members].sum() / count)
    return report


def balanced_error(preds, truth, num_classes: int) -> float:
    return evaluate(preds, truth, num_classes).balanced_error


def group_classes(train_counts, thresholds=(100, 20)) -> list[str]:
    """Many (count >= hi), Medium (lo <= count < hi) or Few (count < lo) per class."""
    hi, lo = thresholds
    counts = np.asarray(train_counts)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    return [MANY if c >= hi else MEDIUM if c >= lo else FEW for c in counts]


def frequency_groups(train_counts, num_groups: int = 10) -> np.ndarray:
    """Bucket classes into ``num_groups`` equal slices of frequency-sorted order.

    Group 0 holds the most frequent classes; ties keep class-index order.
    """
    counts = np.asarray(train_counts)
    order = np.argsort(-counts, kind="stable")
    groups = np.empty(counts.size, dtype=np.int64)
    groups[order] = np.arange(counts.size) * num_groups // counts.size
    return groups
