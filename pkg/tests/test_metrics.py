"""Report arithmetic against an independent tally oracle and known identities."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from emojinet.corpus import default_labels
from emojinet.metrics import (
    aggregate_from_rows, confusion_matrix, format_report, predict_labels,
    report_from_confusion, report_to_dict,
)


# --- prediction -------------------------------------------------------------------

def test_predict_all_zero_logits_tie_to_class_zero():
    assert predict_labels(np.zeros((1, 20))).tolist() == [0]


def test_predict_one_hot():
    logits = np.zeros((1, 20))
    logits[0, 7] = 3.0
    assert predict_labels(logits).tolist() == [7]


def test_predict_two_way_tie_takes_lower_id():
    logits = np.full((1, 20), -1.0)
    logits[0, 3] = logits[0, 9] = 2.0
    assert predict_labels(logits).tolist() == [3]


def test_predict_rejects_nan():
    with pytest.raises(ValueError):
        predict_labels(np.array([[np.nan, 0.0]]))


# --- tally oracle -------------------------------------------------------------------

def oracle_report(y_true, y_pred, k):
    """Independent per-class tally; no shared code with the implementation."""
    rows = []
    for c in range(k):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        rows.append((prec, rec, f1, tp + fn))
    acc = sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)
    return rows, acc


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=100))
def test_report_matches_tally_oracle(pairs):
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    cm = confusion_matrix(y_true, y_pred, num_classes=5)
    report = report_from_confusion(cm, num_classes=5)
    rows, acc = oracle_report(y_true, y_pred, 5)
    assert report.accuracy == pytest.approx(acc, abs=1e-12)
    for got, (p, r, f, s) in zip(report.rows, rows):
        assert got.precision == pytest.approx(p, abs=1e-12)
        assert got.recall == pytest.approx(r, abs=1e-12)
        assert got.f1 == pytest.approx(f, abs=1e-12)
        assert got.support == s


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=80))
def test_accuracy_equals_support_weighted_recall(pairs):
    cm = confusion_matrix([t for t, _ in pairs], [p for _, p in pairs], num_classes=5)
    report = report_from_confusion(cm, num_classes=5)
    assert report.accuracy == pytest.approx(report.weighted[1], abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=80),
       st.randoms(use_true_random=False))
def test_permuting_classes_preserves_aggregates(pairs, rnd):
    k = 6
    perm = list(range(k))
    rnd.shuffle(perm)
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    base = report_from_confusion(confusion_matrix(y_true, y_pred, k), num_classes=k)
    permuted = report_from_confusion(
        confusion_matrix([perm[t] for t in y_true], [perm[p] for p in y_pred], k), num_classes=k)
    assert permuted.accuracy == pytest.approx(base.accuracy, abs=1e-12)
    for a, b in zip(permuted.macro + permuted.weighted, base.macro + base.weighted):
        assert a == pytest.approx(b, abs=1e-12)
    for c in range(k):
        assert permuted.rows[perm[c]] == base.rows[c]


# --- identities and edge cases ---------------------------------------------------------

def test_perfect_predictions():
    cm = np.diag(np.arange(1, 21))
    report = report_from_confusion(cm)
    assert report.accuracy == 1.0
    assert all(row.precision == row.recall == row.f1 == 1.0 for row in report.rows)
    assert report.macro == (1.0, 1.0, 1.0)
    assert report.weighted == (1.0, 1.0, 1.0)


def test_empty_matrix_rejected():
    with pytest.raises(ValueError):
        report_from_confusion(np.zeros((20, 20), dtype=np.int64))


def test_f1_hand_values():
    p, r = 0.91, 0.73
    assert 2 * p * r / (p + r) == pytest.approx(0.81, abs=0.005)
    report = report_from_confusion(np.array([[73, 27], [7, 93]]), num_classes=2)
    row = report.rows[0]
    assert row.precision == pytest.approx(73 / 80) and row.recall == pytest.approx(0.73)


def test_never_predicted_class_flagged_zero_precision():
    # class 1 has support but is never predicted
    cm = np.array([[5, 0], [3, 0]])
    report = report_from_confusion(cm, num_classes=2)
    assert report.rows[1].precision == 0.0 and report.rows[1].f1 == 0.0
    assert report.rows[1].no_predictions


def test_zero_support_class_contributes_zero_to_macro_only():
    cm = np.zeros((3, 3), dtype=np.int64)
    cm[0, 0] = 8
    cm[1, 1] = 2
    report = report_from_confusion(cm, num_classes=3)
    assert report.rows[2].support == 0 and report.rows[2].recall == 0.0
    assert report.macro[1] == pytest.approx(2 / 3)   # zero-support class drags macro
    assert report.weighted[1] == pytest.approx(1.0)  # but has no weight here


def test_aggregate_single_class_degenerate():
    macro, weighted, total = aggregate_from_rows([(0.25, 0.5, 1 / 3, 7)])
    assert weighted == (0.25, 0.5, 1 / 3)
    assert total == 7


def test_format_report_shape():
    labels = default_labels()
    cm = np.eye(20, dtype=np.int64) * 3
    text = format_report(report_from_confusion(cm), labels)
    lines = text.strip().splitlines()
    assert len(lines) == 1 + 20 + 1 + 3  # header, classes, blank, footer
    assert lines[1].startswith(":heart:")
    assert "Weighted Avg" in lines[-1]
    payload = report_to_dict(report_from_confusion(cm), labels)
    assert payload["total_support"] == 60
    assert payload["per_class"][":heart:"]["f1"] == 1.0
