"""Per-class precision/recall/F1/support, accuracy, macro and weighted averages."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import LabelSet, NUM_CLASSES


def predict_labels(logits) -> np.ndarray:
    """Row argmax; ties go to the lowest class id."""
    if not isinstance(logits, np.ndarray) and hasattr(logits, "data"):
        logits = logits.data  # accept tape tensors
    data = np.asarray(logits)
    if not np.isfinite(data).all():
        raise ValueError("non-finite logits")
    return data.argmax(axis=-1)


def confusion_matrix(y_true, y_pred, num_classes: int = NUM_CLASSES) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass(frozen=True)
class ClassRow:
    precision: float
    recall: float
    f1: float
    support: int
    no_predictions: bool = False  # flagged when the class was never predicted


@dataclass(frozen=True)
class ClassificationReport:
    rows: tuple[ClassRow, ...]
    accuracy: float
    macro: tuple[float, float, float]
    weighted: tuple[float, float, float]
    total: int


def report_from_confusion(cm: np.ndarray, num_classes: int = NUM_CLASSES) -> ClassificationReport:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    # zero-division convention: a metric with an empty denominator is 0
    precision = np.divide(tp, predicted, out=np.zeros(num_classes), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros(num_classes), where=support > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros(num_classes), where=pr > 0)
    rows = tuple(
        ClassRow(precision=float(p), recall=float(r), f1=float(f), support=int(s),
                 no_predictions=bool(pred == 0))
        for p, r, f, s, pred in zip(precision, recall, f1, support, predicted)
    )
    macro, weighted, _ = aggregate_from_rows([(r.precision, r.recall, r.f1, r.support) for r in rows])
    return ClassificationReport(
        rows=rows,
        accuracy=float(tp.sum() / total),
        macro=macro,
        weighted=weighted,
        total=total,
    )


def aggregate_from_rows(rows) -> tuple[tuple[float, float, float], tuple[float, float, float], int]:
    """(macro, weighted, total) from per-class (precision, recall, f1, support) rows.

    Macro averages every class uniformly (zero-support classes included at
    their 0 values); weighted averaging uses supports, so zero-support classes
    drop out on their own.
    """
    arr = np.asarray([(p, r, f) for p, r, f, _ in rows], dtype=np.float64)
    support = np.asarray([s for _, _, _, s in rows], dtype=np.float64)
    total = support.sum()
    if total <= 0:
        raise ValueError("aggregate needs positive total support")
    macro = tuple(float(v) for v in arr.mean(axis=0))
    weighted = tuple(float(v) for v in (arr * support[:, None]).sum(axis=0) / total)
    return macro, weighted, int(total)


def format_report(report: ClassificationReport, labels: LabelSet) -> str:
    """Human-readable table: per-class rows then accuracy/macro/weighted footer."""
    name_width = max(len(n) for n in labels.names) + 2
    lines = [f"{'Label':<{name_width}}{'Precision':>10}{'Recall':>10}{'F1-Score':>10}{'Support':>10}"]
    for name, row in zip(labels.names, report.rows):
        lines.append(f"{name:<{name_width}}{row.precision:>10.2f}{row.recall:>10.2f}"
                     f"{row.f1:>10.2f}{row.support:>10d}")
    lines.append("")
    lines.append(f"{'Accuracy':<{name_width}}{'':>10}{'':>10}{report.accuracy:>10.2f}{report.total:>10d}")
    for title, (p, r, f) in (("Macro Avg", report.macro), ("Weighted Avg", report.weighted)):
        lines.append(f"{title:<{name_width}}{p:>10.2f}{r:>10.2f}{f:>10.2f}{report.total:>10d}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: ClassificationReport, labels: LabelSet) -> dict:
    return {
        "per_class": {
            name: {
                "precision": row.precision,
                "recall": row.recall,
                "f1": row.f1,
                "support": row.support,
                "no_predictions": row.no_predictions,
            }
            for name, row in zip(labels.names, report.rows)
        },
        "accuracy": report.accuracy,
        "macro_avg": {"precision": report.macro[0], "recall": report.macro[1], "f1": report.macro[2]},
        "weighted_avg": {"precision": report.weighted[0], "recall": report.weighted[1],
                         "f1": report.weighted[2]},
        "total_support": report.total,
    }


def write_report_files(report: ClassificationReport, labels: LabelSet, out_dir) -> None:
    """report.txt (rounded table) and report.json (exact values) side by side."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(format_report(report, labels), encoding="utf-8")
    payload = json.dumps(report_to_dict(report, labels), indent=2, sort_keys=True)
    (out_dir / "report.json").write_text(payload + "\n", encoding="utf-8")


def write_confusion_csv(cm: np.ndarray, labels: LabelSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("true\\pred," + ",".join(labels.names) + "\n")
        for name, row in zip(labels.names, cm):
            fh.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")
