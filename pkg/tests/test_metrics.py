import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dragonfruit import metrics
from dragonfruit.errors import ShapeError
from dragonfruit.metrics import (
    ClassReport,
    ConfusionMatrix,
    compute_report,
    confusion_matrix,
    one_vs_rest,
    render_text,
    report_to_dict,
)
from dragonfruit.network import ClassLabel


def recount_oracle(truths, preds):
    """Independent tally: per-class tp/fp/fn/tn straight from the label lists."""
    stats = {}
    n = len(truths)
    for c in range(4):
        tp = sum(1 for t, p in zip(truths, preds) if t == c and p == c)
        fp = sum(1 for t, p in zip(truths, preds) if t != c and p == c)
        fn = sum(1 for t, p in zip(truths, preds) if t == c and p != c)
        stats[c] = (tp, fp, fn, n - tp - fp - fn)
    return stats


def binary_example_matrix():
    """tp=90, fn=10, fp=5, tn=95 folded into the two leading classes."""
    counts = np.zeros((4, 4), dtype=np.int64)
    counts[0, 0] = 90
    counts[0, 1] = 10
    counts[1, 0] = 5
    counts[1, 1] = 95
    return ConfusionMatrix(counts)


def test_worked_binary_example_to_nine_decimals():
    report = compute_report(binary_example_matrix())
    s = report.per_class[ClassLabel.DEFECT]
    assert report.accuracy == pytest.approx(0.925, abs=1e-9)
    assert s.precision == pytest.approx(90 / 95, abs=1e-9)
    assert s.precision == pytest.approx(0.947368421, abs=1e-9)
    assert s.recall == pytest.approx(0.9, abs=1e-9)
    assert s.f1 == pytest.approx(12 / 13, abs=1e-9)
    assert s.f1 == pytest.approx(0.923076923, abs=1e-9)


def test_worked_example_counts():
    tp, fp, fn, tn = one_vs_rest(binary_example_matrix(), 0)
    assert (tp, fp, fn, tn) == (90, 5, 10, 95)


def test_confusion_matrix_placement():
    cm = confusion_matrix([0, 0, 1, 2, 3, 3], [0, 1, 1, 2, 3, 0])
    expected = np.zeros((4, 4), dtype=np.int64)
    expected[0, 0] = 1
    expected[0, 1] = 1
    expected[1, 1] = 1
    expected[2, 2] = 1
    expected[3, 3] = 1
    expected[3, 0] = 1
    assert np.array_equal(cm.counts, expected)
    assert cm.total == 6
    assert cm.trace == 4


def test_confusion_matrix_input_validation():
    with pytest.raises(ShapeError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(ValueError):
        confusion_matrix([0, 4], [0, 0])
    with pytest.raises(ValueError):
        confusion_matrix([0, -1], [0, 0])
    with pytest.raises(ShapeError):
        ConfusionMatrix(np.zeros((3, 3), dtype=np.int64))
    with pytest.raises(ValueError):
        ConfusionMatrix(np.full((4, 4), -1))


def test_empty_and_absent_classes_report_zero_not_nan():
    cm = confusion_matrix([], [])
    report = compute_report(cm)
    assert report.accuracy == 0.0
    for s in report.per_class.values():
        assert s.precision == 0.0 and s.recall == 0.0 and s.f1 == 0.0

    # class 3 never appears: its one-vs-rest ratios are 0/0
    cm = confusion_matrix([0, 1, 2], [0, 1, 2])
    report = compute_report(cm)
    assert report.per_class[ClassLabel.MATURE].precision == 0.0
    assert report.per_class[ClassLabel.MATURE].f1 == 0.0
    assert report.accuracy == 1.0


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1))
def test_random_matrices_match_recount_oracle(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 200))
    truths = r.integers(0, 4, n).tolist()
    preds = r.integers(0, 4, n).tolist()
    cm = confusion_matrix(truths, preds)
    report = compute_report(cm)
    oracle = recount_oracle(truths, preds)
    assert cm.total == n
    hits = sum(1 for t, p in zip(truths, preds) if t == p)
    assert report.accuracy == hits / n
    for c in range(4):
        tp, fp, fn, tn = oracle[c]
        assert one_vs_rest(cm, c) == (tp, fp, fn, tn)
        s = report.per_class[ClassLabel(c)]
        assert s.precision == (tp / (tp + fp) if tp + fp else 0.0)
        assert s.recall == (tp / (tp + fn) if tp + fn else 0.0)
        if s.precision + s.recall:
            assert s.f1 == pytest.approx(
                2 * s.precision * s.recall / (s.precision + s.recall), abs=1e-12
            )
        else:
            assert s.f1 == 0.0


def test_macro_averages_are_plain_means():
    cm = confusion_matrix([0, 1, 2, 3, 0, 1], [0, 1, 2, 0, 0, 2])
    report = compute_report(cm)
    stats = list(report.per_class.values())
    assert report.macro_precision == pytest.approx(sum(s.precision for s in stats) / 4)
    assert report.macro_recall == pytest.approx(sum(s.recall for s in stats) / 4)
    assert report.macro_f1 == pytest.approx(sum(s.f1 for s in stats) / 4)


def test_report_to_dict_layout():
    report = compute_report(binary_example_matrix())
    d = report_to_dict(report)
    assert d["total"] == 200
    assert d["accuracy"] == pytest.approx(0.925)
    assert set(d["per_class"]) == {"defect", "fresh", "immature", "mature"}
    assert d["per_class"]["defect"]["tp"] == 90
    assert d["per_class"]["defect"]["recall"] == pytest.approx(0.9)


def test_render_text_contains_counts_and_accuracy():
    cm = binary_example_matrix()
    text = render_text(cm, compute_report(cm))
    assert "defect" in text and "mature" in text
    assert "90" in text and "95" in text
    assert "accuracy: 0.9250 (185/200)" in text
    assert "0.9474" in text  # defect precision at 4 decimals
