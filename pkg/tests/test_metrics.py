import os
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leafvit import metrics
from leafvit.errors import DataError, ParseError

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")

# (micro-F1, Hamming) pairs from the six published evaluation tables
PUBLISHED_PAIRS = [(0.94, 0.06), (0.95, 0.054), (0.90, 0.097), (0.92, 0.079), (0.89, 0.112), (0.91, 0.088)]


def samples_from_matrix(counts):
    truths, preds = [], []
    for t, row in enumerate(counts):
        for p, n in enumerate(row):
            truths += [t] * int(n)
            preds += [p] * int(n)
    return truths, preds


def counting_oracle(truths, preds, k):
    """Per-class and averaged metrics by walking the sample pairs; exact rationals until the end."""
    prec, rec, f1 = [], [], []
    for c in range(k):
        tp = sum(1 for t, p in zip(truths, preds) if t == c and p == c)
        fp = sum(1 for t, p in zip(truths, preds) if t != c and p == c)
        fn = sum(1 for t, p in zip(truths, preds) if t == c and p != c)
        prec.append(float(Fraction(tp, tp + fp)) if tp + fp else 0.0)
        rec.append(float(Fraction(tp, tp + fn)) if tp + fn else 0.0)
        f1.append(float(Fraction(2 * tp, 2 * tp + fp + fn)) if tp + fp + fn else 0.0)
    right = sum(1 for t, p in zip(truths, preds) if t == p)
    n = len(truths)
    micro = float(Fraction(right, n))
    macro = tuple(sum(v) / k for v in (prec, rec, f1))
    wrong = n - right
    ham = 1.0 - micro
    assert abs(Fraction(ham) - Fraction(wrong, n)) < Fraction(1, 2**50)
    return prec, rec, f1, micro, macro, ham


def test_confusion_examples():
    cm = metrics.confusion_matrix([0, 0, 1], [0, 1, 1], 2)
    assert cm.counts.tolist() == [[1, 1], [0, 1]]
    cm = metrics.confusion_matrix([0, 1, 2], [0, 1, 2], 3)
    assert cm.counts.tolist() == np.eye(3, dtype=int).tolist()


@pytest.mark.parametrize("truths, preds", [([], []), ([0, 1], [0]), ([0, 2], [0, 1])])
def test_confusion_errors(truths, preds):
    with pytest.raises(DataError):
        metrics.confusion_matrix(truths, preds, 2)


def test_per_class_examples():
    cm = metrics.ConfusionMatrix(np.array([[30, 0], [0, 5]]), ("a", "b"))
    per = metrics.per_class_metrics(cm)
    assert (per.precision[0], per.recall[0], per.f1[0], per.support[0]) == (1.0, 1.0, 1.0, 30)

    cm = metrics.ConfusionMatrix(np.array([[26, 4], [3, 27]]), ("a", "b"))
    per = metrics.per_class_metrics(cm)
    assert (round(per.precision[0], 3), round(per.recall[0], 3), round(per.f1[0], 3)) == (0.897, 0.867, 0.881)

    cm = metrics.ConfusionMatrix(np.array([[2, 0, 0], [0, 3, 0], [0, 0, 0]]), ("a", "b", "c"))
    per = metrics.per_class_metrics(cm)
    assert (per.precision[2], per.recall[2], per.f1[2], per.support[2]) == (0.0, 0.0, 0.0, 0)


def test_macro_mean_of_f1():
    # F1 of 0.8 and 1.0
    cm = metrics.ConfusionMatrix(np.array([[4, 0, 0], [1, 0, 0], [0, 0, 5]]), ("a", "b", "c"))
    per = metrics.per_class_metrics(cm)
    assert per.f1[0] == pytest.approx(8 / 9)
    cm = metrics.ConfusionMatrix(np.array([[2, 0], [1, 0]]), ("a", "b"))
    two = metrics.ConfusionMatrix(np.array([[2, 0], [0, 2]]), ("a", "b"))
    assert metrics.per_class_metrics(cm).f1[0] == pytest.approx(0.8)
    f1s = [metrics.per_class_metrics(cm).f1[0], metrics.per_class_metrics(two).f1[0]]
    assert sum(f1s) / 2 == pytest.approx(0.9)


def test_hamming_examples():
    assert metrics.hamming_loss([1, 2, 3], [1, 2, 3]) == 0.0
    assert metrics.hamming_loss(list(range(10)), [0, 1, 2, 3, 4, 5, 6, 0, 0, 0]) == pytest.approx(0.3)
    with pytest.raises(DataError):
        metrics.hamming_loss([1], [1, 2])
    with pytest.raises(DataError):
        metrics.hamming_loss([], [])


def test_random_matrices_match_counting_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        k = int(rng.integers(1, 7))
        counts = rng.integers(0, 12, size=(k, k)) * (rng.random((k, k)) < 0.7)
        if counts.sum() == 0:
            counts[0, 0] = 1
        truths, preds = samples_from_matrix(counts)
        report = metrics.evaluate(truths, preds, [f"c{i}" for i in range(k)])
        prec, rec, f1, micro, macro, ham = counting_oracle(truths, preds, k)
        assert report.confusion.counts.tolist() == counts.tolist()
        assert list(report.per_class.precision) == prec
        assert list(report.per_class.recall) == rec
        assert list(report.per_class.f1) == f1
        s = report.summary
        assert s.micro_precision == s.micro_recall == s.micro_f1 == micro
        assert (s.macro_precision, s.macro_recall, s.macro_f1) == macro
        assert s.hamming_loss == ham
        assert s.hamming_loss == 1 - metrics.accuracy(truths, preds)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=200))
def test_hamming_is_complement_of_accuracy(pairs):
    truths, preds = zip(*pairs)
    assert metrics.hamming_loss(truths, preds) == 1 - metrics.accuracy(truths, preds)
    s = metrics.evaluate(truths, preds, list("abcde")).summary
    assert s.micro_f1 + s.hamming_loss == pytest.approx(1.0, abs=1e-15)
    assert 0.0 <= s.macro_f1 <= 1.0


@pytest.mark.parametrize("micro_f1, hamming", PUBLISHED_PAIRS)
def test_published_pairs_are_complementary(micro_f1, hamming):
    assert abs(1 - hamming - micro_f1) <= 0.01


def test_report_layout():
    report = metrics.evaluate([0, 0, 1, 2], [0, 1, 1, 2], ["healthy", "rust", "blight"])
    lines = report.text().splitlines()
    assert lines[0].split() == ["Class", "Precision", "Recall", "F1-Score", "Support"]
    assert [ln.split()[0] for ln in lines[1:4]] == ["healthy", "rust", "blight"]
    assert lines[4].startswith("Micro-Averaged Metrics")
    assert lines[5].startswith("Macro-Averaged Metrics")
    assert lines[6].startswith("Hamming Loss") and lines[6].endswith("0.250")
    assert len({len(ln) for ln in lines[:4] + lines[6:]}) == 1


def test_report_empty_classes_rejected():
    empty = metrics.ClassReport((), (), (), ())
    summary = metrics.SummaryReport(0, 0, 0, 0, 0, 0, 0)
    with pytest.raises(DataError):
        metrics.render_report(empty, summary, ())


def test_csv_round_trip():
    report = metrics.evaluate([0, 0, 1, 2, 2], [0, 2, 1, 2, 1], ["a", "b,c", "d"])
    per, summary, names = metrics.parse_report_csv(report.csv())
    assert names == ("a", "b,c", "d")
    assert per == report.per_class
    assert summary == report.summary
    assert metrics.render_report(per, summary, names) == report.text()


@pytest.mark.parametrize("text", ["", "a,b\n", "row,precision,recall,f1,support\nx,1,1,1,1\n",
                                  "row,precision,recall,f1,support\nx,1,1,1,1\nmicro,1,1,1,1\nmacro,1,1,1,1\nham,0,,,\n"])
def test_csv_parse_errors(text):
    with pytest.raises(ParseError):
        metrics.parse_report_csv(text)


def _golden(name):
    with open(os.path.join(GOLDEN, name), encoding="utf-8") as fh:
        return fh.read()


def test_golden_perfect_two_class():
    truths, preds = samples_from_matrix([[30, 0], [0, 30]])
    text = metrics.evaluate(truths, preds, ["Healthy", "Diseased"]).text()
    assert text == _golden("perfect_two_class.txt")
    assert "0.000" in text.splitlines()[-1]


def test_golden_counting_example():
    truths, preds = samples_from_matrix([[26, 4], [3, 27]])
    report = metrics.evaluate(truths, preds, ["Apple-Healthy", "Apple-Scab"])
    assert report.text() == _golden("counting_example.txt")
    assert report.csv() == _golden("counting_example.csv")
