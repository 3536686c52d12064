"""Multiclass evaluation: confusion matrix, per-class and macro P/R/F1."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .network import CLASS_NAMES, NUM_CLASSES, ClassLabel


@dataclass
class ConfusionMatrix:
    """counts[t][p] = samples of true class t predicted as class p."""

    counts: np.ndarray  # [4, 4] int64

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ShapeError(f"confusion matrix must be 4x4, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))


def confusion_matrix(truths: Sequence[int], preds: Sequence[int]) -> ConfusionMatrix:
    t = np.asarray(truths, dtype=np.int64)
    p = np.asarray(preds, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ShapeError(f"truths {t.shape} and preds {p.shape} must be equal-length 1-D")
    if t.size and (t.min() < 0 or t.max() >= NUM_CLASSES or p.min() < 0 or p.max() >= NUM_CLASSES):
        raise ValueError(f"labels must be 0..{NUM_CLASSES - 1}")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def one_vs_rest(cm: ConfusionMatrix, c: int) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) for class c against the rest."""
    if not 0 <= c < NUM_CLASSES:
        raise ValueError(f"class must be 0..{NUM_CLASSES - 1}, got {c}")
    m = cm.counts
    tp = int(m[c, c])
    fp = int(m[:, c].sum() - m[c, c])
    fn = int(m[c, :].sum() - m[c, c])
    tn = int(m.sum() - tp - fp - fn)
    return tp, fp, fn, tn


def _ratio(num: int, den: int) -> float:
    # undefined fractions (0/0) report 0 rather than raising
    return num / den if den else 0.0


@dataclass
class ClassStats:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


@dataclass
class ClassReport:
    per_class: dict[ClassLabel, ClassStats]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    total: int


def compute_report(cm: ConfusionMatrix) -> ClassReport:
    """Accuracy plus one-vs-rest precision/recall/F1 per class and macro averages."""
    per_class: dict[ClassLabel, ClassStats] = {}
    for label in ClassLabel:
        tp, fp, fn, tn = one_vs_rest(cm, label)
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassStats(tp, fp, fn, tn, precision, recall, f1)
    macro_p = sum(s.precision for s in per_class.values()) / NUM_CLASSES
    macro_r = sum(s.recall for s in per_class.values()) / NUM_CLASSES
    macro_f = sum(s.f1 for s in per_class.values()) / NUM_CLASSES
    accuracy = _ratio(cm.trace, cm.total)
    return ClassReport(per_class, accuracy, macro_p, macro_r, macro_f, cm.total)


def report_to_dict(report: ClassReport) -> dict:
    """JSON-ready view of a report, keyed by class name."""
    return {
        "total": report.total,
        "accuracy": report.accuracy,
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "macro_f1": report.macro_f1,
        "per_class": {
            CLASS_NAMES[label]: {
                "tp": s.tp, "fp": s.fp, "fn": s.fn, "tn": s.tn,
                "precision": s.precision, "recall": s.recall, "f1": s.f1,
            }
            for label, s in report.per_class.items()
        },
    }


def render_text(cm: ConfusionMatrix, report: ClassReport) -> str:
    """Aligned plain-text confusion matrix and per-class metric table."""
    names = [name for name in CLASS_NAMES]
    width = max(9, *(len(n) for n in names))
    lines = ["confusion matrix (rows = truth, cols = predicted)"]
    header = " " * (width + 2) + "".join(f"{n:>{width + 2}}" for n in names)
    lines.append(header)
    for label in ClassLabel:
        row = "".join(f"{int(cm.counts[label, q]):>{width + 2}}" for q in range(NUM_CLASSES))
        lines.append(f"{names[label]:>{width + 2}}{row}")
    lines.append("")
    lines.append(f"{'class':>{width + 2}}{'precision':>12}{'recall':>12}{'f1':>12}")
    for label in ClassLabel:
        s = report.per_class[label]
        lines.append(
            f"{names[label]:>{width + 2}}{s.precision:>12.4f}{s.recall:>12.4f}{s.f1:>12.4f}"
        )
    lines.append(
        f"{'macro':>{width + 2}}{report.macro_precision:>12.4f}"
        f"{report.macro_recall:>12.4f}{report.macro_f1:>12.4f}"
    )
    lines.append(f"accuracy: {report.accuracy:.4f} ({cm.trace}/{cm.total})")
    return "\n".join(lines)
