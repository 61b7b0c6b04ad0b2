"""Confusion matrix, per-class and averaged precision/recall/F1, Hamming loss, and report rendering.

Zero denominators give a metric of 0. Hamming loss is evaluated as
``1 - accuracy`` so the complement identity holds bit-for-bit. F1 is computed from counts as
``2TP / (2TP + FP + FN)``, which equals ``2PR / (P + R)`` but avoids an extra
rounding step, so pooled (micro) precision, recall and F1 are bit-identical.
"""
import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K), rows = truth, cols = prediction
    class_names: tuple

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassReport:
    precision: tuple
    recall: tuple
    f1: tuple
    support: tuple


@dataclass(frozen=True)
class SummaryReport:
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    hamming_loss: float


def _ratio(num, den):
    return num / den if den else 0.0


def confusion_matrix(truths, preds, num_classes, class_names=None):
    truths = [int(t) for t in truths]
    preds = [int(p) for p in preds]
    if len(truths) != len(preds):
        raise DataError(f"{len(truths)} truths but {len(preds)} predictions")
    if not truths:
        raise DataError("cannot build a confusion matrix from empty label lists")
    bad = [v for v in truths + preds if not 0 <= v < num_classes]
    if bad:
        raise DataError(f"label {bad[0]} outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    if class_names is None:
        class_names = [str(k) for k in range(num_classes)]
    if len(class_names) != num_classes:
        raise DataError(f"{len(class_names)} class names for {num_classes} classes")
    return ConfusionMatrix(counts, tuple(class_names))


def per_class_metrics(cm):
    c = cm.counts
    tp = np.diag(c)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    prec, rec, f1 = [], [], []
    for t, p, n in zip(tp.tolist(), fp.tolist(), fn.tolist()):
        prec.append(_ratio(t, t + p))
        rec.append(_ratio(t, t + n))
        f1.append(_ratio(2 * t, 2 * t + p + n))
    return ClassReport(tuple(prec), tuple(rec), tuple(f1), tuple(c.sum(axis=1).tolist()))


def averaged_metrics(cm):
    c = cm.counts
    tp = int(np.trace(c))
    total = int(c.sum())
    # single-label: pooled FP and FN both equal the off-diagonal mass
    fp = fn = total - tp
    per = per_class_metrics(cm)
    k = len(per.precision)
    return SummaryReport(
        micro_precision=_ratio(tp, tp + fp),
        micro_recall=_ratio(tp, tp + fn),
        micro_f1=_ratio(2 * tp, 2 * tp + fp + fn),
        macro_precision=sum(per.precision) / k,
        macro_recall=sum(per.recall) / k,
        macro_f1=sum(per.f1) / k,
        hamming_loss=1.0 - _ratio(tp, total) if total else 0.0,
    )


def accuracy(truths, preds):
    truths, preds = list(truths), list(preds)
    if len(truths) != len(preds):
        raise DataError(f"{len(truths)} truths but {len(preds)} predictions")
    if not truths:
        raise DataError("accuracy of an empty list is undefined")
    return sum(int(t) == int(p) for t, p in zip(truths, preds)) / len(truths)


def hamming_loss(truths, preds):
    """Fraction of positions where the prediction differs from the truth."""
    return 1.0 - accuracy(truths, preds)


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    per_class: ClassReport
    summary: SummaryReport

    @property
    def class_names(self):
        return self.confusion.class_names

    def text(self):
        return render_report(self.per_class, self.summary, self.class_names)

    def csv(self):
        return report_csv(self.per_class, self.summary, self.class_names)


def evaluate(truths, preds, class_names):
    cm = confusion_matrix(truths, preds, len(class_names), class_names)
    return EvaluationReport(cm, per_class_metrics(cm), averaged_metrics(cm))


def render_report(per_class, summary, class_names):
    """Fixed-width text table with 3-decimal metrics; output is byte-stable."""
    if not class_names:
        raise DataError("cannot render a report without classes")
    if len(class_names) != len(per_class.precision):
        raise DataError(f"{len(class_names)} class names for {len(per_class.precision)} classes")
    width = max(24, max(len(n) for n in class_names))
    lines = [f"{'Class':<{width}}  {'Precision':>9}  {'Recall':>9}  {'F1-Score':>9}  {'Support':>7}"]
    rows = zip(class_names, per_class.precision, per_class.recall, per_class.f1, per_class.support)
    for name, p, r, f, s in rows:
        lines.append(f"{name:<{width}}  {p:>9.3f}  {r:>9.3f}  {f:>9.3f}  {s:>7d}")
    s = summary
    lines.append(f"{'Micro-Averaged Metrics':<{width}}  {s.micro_precision:>9.3f}  "
                 f"{s.micro_recall:>9.3f}  {s.micro_f1:>9.3f}")
    lines.append(f"{'Macro-Averaged Metrics':<{width}}  {s.macro_precision:>9.3f}  "
                 f"{s.macro_recall:>9.3f}  {s.macro_f1:>9.3f}")
    lines.append(f"{'Hamming Loss':<{width}}  {'':>9}  {'':>9}  {'':>9}  {s.hamming_loss:>7.3f}")
    return "\n".join(lines) + "\n"


CSV_HEADER = ["row", "precision", "recall", "f1", "support"]


def report_csv(per_class, summary, class_names):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in zip(class_names, per_class.precision, per_class.recall, per_class.f1, per_class.support):
        w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), row[4]])
    total = sum(per_class.support)
    s = summary
    w.writerow(["micro", repr(s.micro_precision), repr(s.micro_recall), repr(s.micro_f1), total])
    w.writerow(["macro", repr(s.macro_precision), repr(s.macro_recall), repr(s.macro_f1), total])
    w.writerow(["hamming_loss", repr(s.hamming_loss), "", "", ""])
    return buf.getvalue()


def parse_report_csv(text):
    """Inverse of :func:`report_csv`: ``(per_class, summary, class_names)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ParseError("metrics CSV has an unexpected header", 1)
    if len(rows) < 5:
        raise ParseError("metrics CSV is missing summary rows", len(rows))
    try:
        body, micro, macro, ham = rows[1:-3], rows[-3], rows[-2], rows[-1]
        if (micro[0], macro[0], ham[0]) != ("micro", "macro", "hamming_loss"):
            raise ValueError("summary rows out of order")
        names = tuple(r[0] for r in body)
        per = ClassReport(
            tuple(float(r[1]) for r in body), tuple(float(r[2]) for r in body),
            tuple(float(r[3]) for r in body), tuple(int(r[4]) for r in body),
        )
        summary = SummaryReport(
            float(micro[1]), float(micro[2]), float(micro[3]),
            float(macro[1]), float(macro[2]), float(macro[3]), float(ham[1]),
        )
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed metrics CSV: {exc}") from exc
    return per, summary, names
