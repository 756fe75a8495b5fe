"""Confusion matrices, overall accuracy, kappa and the kappa Z test.

Kappa variance follows the large-sample delta-method estimator. With cell
proportions ``p_ij = n_ij / N``, row sums ``p_i+`` (reference) and column sums
``p_+j`` (predicted)::

    t1 = sum_i p_ii
    t2 = sum_i p_i+ p_+i
    t3 = sum_i p_ii (p_i+ + p_+i)
    t4 = sum_ij p_ij (p_j+ + p_+i)^2

    var = 1/N * [ t1 (1 - t1) / (1 - t2)^2
                + 2 (1 - t1) (2 t1 t2 - t3) / (1 - t2)^3
                + (1 - t1)^2 (t4 - 4 t2^2) / (1 - t2)^4 ]

Two kappas are compared with ``Z = |k1 - k2| / sqrt(var1 + var2)``, judged
two-tailed against 1.96 (95%).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

Z_CRITICAL = 1.96


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows index the reference class, columns the predicted class."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        cm = np.array(self.counts)
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
            raise MetricsError("confusion matrix must be square and non-empty")
        if not np.all(np.equal(np.mod(cm, 1), 0)) or np.any(cm < 0):
            raise MetricsError("confusion counts must be non-negative integers")
        cm = cm.astype(np.int64)
        if cm.sum() <= 0:
            raise MetricsError("confusion matrix holds no samples")
        cm.setflags(write=False)
        object.__setattr__(self, "counts", cm)

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _cm(cm) -> ConfusionMatrix:
    return cm if isinstance(cm, ConfusionMatrix) else ConfusionMatrix(cm)


def confusion_matrix(truth: Sequence[int], predicted: Sequence[int], n_classes: int) -> ConfusionMatrix:
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted, dtype=np.int64).reshape(-1)
    if t.size != p.size:
        raise MetricsError(f"label sequences differ in length ({t.size} vs {p.size})")
    if t.size == 0:
        raise MetricsError("no labels to compare")
    for name, arr in (("truth", t), ("predicted", p)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise MetricsError(f"{name} label outside 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def overall_accuracy(cm, exact: bool = False):
    cm = _cm(cm)
    if exact:
        return Fraction(int(np.trace(cm.counts)), cm.total)
    return float(np.trace(cm.counts)) / cm.total


def _chance_agreement(cm: ConfusionMatrix, exact: bool):
    rows = cm.counts.sum(axis=1)
    cols = cm.counts.sum(axis=0)
    if exact:
        return Fraction(sum(int(r) * int(c) for r, c in zip(rows, cols)), cm.total ** 2)
    return float(rows.astype(float) @ cols.astype(float)) / float(cm.total) ** 2


def kappa(cm, exact: bool = False):
    """Cohen's kappa; ``exact=True`` returns a :class:`fractions.Fraction`."""
    cm = _cm(cm)
    po = overall_accuracy(cm, exact)
    pe = _chance_agreement(cm, exact)
    if pe == 1:
        raise MetricsError("chance agreement is 1; kappa is undefined")
    return (po - pe) / (1 - pe)


def kappa_variance(cm) -> float:
    cm = _cm(cm)
    N = float(cm.total)
    p = cm.counts / N
    rows = p.sum(axis=1)
    cols = p.sum(axis=0)
    t1 = float(np.trace(p))
    t2 = float(rows @ cols)
    if t2 >= 1.0:
        raise MetricsError("chance agreement is 1; kappa variance is undefined")
    t3 = float(np.diag(p) @ (rows + cols))
    # entry (i, j) pairs with the row total of j and the column total of i
    t4 = float(np.sum(p * (rows[np.newaxis, :] + cols[:, np.newaxis]) ** 2))
    a = 1.0 - t1
    b = 1.0 - t2
    var = (t1 * a / b ** 2
           + 2.0 * a * (2.0 * t1 * t2 - t3) / b ** 3
           + a ** 2 * (t4 - 4.0 * t2 ** 2) / b ** 4) / N
    return max(var, 0.0)


def z_compare(kappa1: float, var1: float, kappa2: float, var2: float) -> float:
    if var1 < 0 or var2 < 0:
        raise MetricsError("variances must be non-negative")
    diff = abs(kappa1 - kappa2)
    if var1 + var2 == 0:
        if diff == 0:
            return 0.0
        raise MetricsError("both variances are zero and the kappas differ; Z is undefined")
    return diff / math.sqrt(var1 + var2)


def is_significant(z: float, critical: float = Z_CRITICAL) -> bool:
    # two-tailed: the sign of a signed statistic does not matter
    return abs(z) > critical


def producer_accuracy(cm) -> np.ndarray:
    """Per reference class: correctly labelled / reference total (NaN if absent)."""
    cm = _cm(cm)
    rows = cm.counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, np.diag(cm.counts) / rows, np.nan)


def user_accuracy(cm) -> np.ndarray:
    cm = _cm(cm)
    cols = cm.counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cols > 0, np.diag(cm.counts) / cols, np.nan)


@dataclass(frozen=True)
class AccuracyReport:
    names: tuple[str, ...]
    matrices: tuple[ConfusionMatrix, ...]

    def summary(self, i: int) -> dict:
        cm = self.matrices[i]
        try:
            k = kappa(cm)
            v = kappa_variance(cm)
        except MetricsError:
            k, v = math.nan, math.nan
        return {"name": self.names[i], "overall_accuracy": overall_accuracy(cm),
                "kappa": k, "kappa_variance": v, "kappa_se": math.sqrt(v) if v == v else v}

    def z_table(self) -> list[tuple[str, str, float, bool]]:
        rows = []
        for i, j in combinations(range(len(self.names)), 2):
            a, b = self.summary(i), self.summary(j)
            try:
                z = z_compare(a["kappa"], a["kappa_variance"], b["kappa"], b["kappa_variance"])
            except MetricsError:
                z = math.inf
            rows.append((a["name"], b["name"], z, is_significant(z)))
        return rows

    def to_text(self, class_names: Mapping[int, str] | None = None) -> str:
        out = []
        for i in range(len(self.names)):
            cm = self.matrices[i]
            labels = [str((class_names or {}).get(k, k)) for k in range(cm.n_classes)]
            width = max(6, *(len(s) for s in labels), len(str(cm.counts.max())))
            s = self.summary(i)
            out.append(f"== {s['name']} ==")
            out.append("confusion matrix (rows = reference, columns = predicted)")
            out.append(" " * (width + 1) + " ".join(f"{lab:>{width}}" for lab in labels))
            for lab, row in zip(labels, cm.counts):
                out.append(f"{lab:>{width}} " + " ".join(f"{v:>{width}d}" for v in row))
            pa, ua = producer_accuracy(cm), user_accuracy(cm)
            out.append(f"{'class':>{width}} {'producer':>9} {'user':>9}")
            for lab, p, u in zip(labels, pa, ua):
                out.append(f"{lab:>{width}} {p:>9.4f} {u:>9.4f}")
            out.append(f"overall accuracy: {s['overall_accuracy']:.4f}")
            out.append(f"kappa: {s['kappa']:.4f} +/- {s['kappa_se']:.4f} (standard error)")
            out.append("")
        for a, b, z, sig in self.z_table():
            verdict = "significant" if sig else "not significant"
            out.append(f"Z({a} vs {b}) = {z:.4f}: {verdict} at {Z_CRITICAL}")
        return "\n".join(out).rstrip() + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "name", "key", "value"])
        for i in range(len(self.names)):
            s = self.summary(i)
            cm = self.matrices[i]
            for key in ("overall_accuracy", "kappa", "kappa_variance", "kappa_se"):
                w.writerow(["summary", s["name"], key, repr(float(s[key]))])
            for r, row in enumerate(cm.counts):
                for c, v in enumerate(row):
                    w.writerow(["confusion", s["name"], f"{r}:{c}", int(v)])
            for k, (p, u) in enumerate(zip(producer_accuracy(cm), user_accuracy(cm))):
                w.writerow(["producer_accuracy", s["name"], k, repr(float(p))])
                w.writerow(["user_accuracy", s["name"], k, repr(float(u))])
        for a, b, z, sig in self.z_table():
            w.writerow(["z", f"{a} vs {b}", "z", repr(float(z))])
            w.writerow(["z", f"{a} vs {b}", "significant", int(sig)])
        return buf.getvalue()
