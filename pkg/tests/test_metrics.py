import csv
import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from landcover.metrics import (AccuracyReport, ConfusionMatrix, MetricsError, confusion_matrix,
                               is_significant, kappa, kappa_variance, overall_accuracy,
                               producer_accuracy, user_accuracy, z_compare)

from oracles import bootstrap_kappa_variance, kappa_from_counts

FIXTURE = [[40, 10], [20, 30]]


def test_confusion_examples():
    np.testing.assert_array_equal(confusion_matrix([0, 1, 0, 1], [0, 1, 0, 1], 2).counts,
                                  [[2, 0], [0, 2]])
    np.testing.assert_array_equal(confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2).counts,
                                  [[1, 1], [0, 2]])
    for t, p in (([], []), ([0, 1], [0]), ([0, 2], [0, 1])):
        with pytest.raises(MetricsError):
            confusion_matrix(t, p, 2)


def test_matrix_validation():
    for bad in ([[1, 2]], [[-1, 0], [0, 1]], [[0, 0], [0, 0]], [[0.5, 0], [0, 1]]):
        with pytest.raises(MetricsError):
            ConfusionMatrix(bad)


def test_fixture_exact():
    assert overall_accuracy(FIXTURE, exact=True) == Fraction(7, 10)
    assert kappa(FIXTURE, exact=True) == Fraction(2, 5)
    assert overall_accuracy(FIXTURE) == pytest.approx(0.70, abs=1e-15)
    assert kappa(FIXTURE) == pytest.approx(0.40, abs=1e-15)
    assert kappa(FIXTURE) == pytest.approx(kappa_from_counts(FIXTURE), abs=1e-15)


def test_perfect_diagonal():
    cm = np.diag([5, 7, 3])
    assert overall_accuracy(cm) == 1.0 and kappa(cm) == 1.0
    assert kappa_variance(cm) == pytest.approx(0.0, abs=1e-12)


def test_degenerate_chance_agreement():
    with pytest.raises(MetricsError):
        kappa([[9, 0], [0, 0]])
    with pytest.raises(MetricsError):
        kappa_variance([[9, 0], [0, 0]])


def test_variance_scales_inversely_with_n():
    cm = np.array([[21, 4, 3], [6, 17, 2], [1, 5, 30]])
    assert kappa_variance(4 * cm) == pytest.approx(kappa_variance(cm) / 4, rel=1e-12)


def test_variance_matches_bootstrap():
    boot = bootstrap_kappa_variance(FIXTURE, resamples=100_000, seed=1)
    assert kappa_variance(FIXTURE) == pytest.approx(boot, rel=0.2)


def test_z_examples():
    assert z_compare(0.7, 0.001, 0.7, 0.001) == 0.0
    assert not is_significant(0.0)
    z = z_compare(0.6, 0.0004, 0.5, 0.0005)
    assert z == pytest.approx(0.1 / 0.03, abs=1e-9)
    assert is_significant(z)
    assert z_compare(0.5, 0.0, 0.5, 0.0) == 0.0
    with pytest.raises(MetricsError):
        z_compare(0.6, 0.0, 0.5, 0.0)
    with pytest.raises(MetricsError):
        z_compare(0.6, -1.0, 0.5, 0.1)
    assert is_significant(1.97) and not is_significant(1.96)


def test_per_class_accuracies():
    np.testing.assert_allclose(producer_accuracy(FIXTURE), [0.8, 0.6])
    np.testing.assert_allclose(user_accuracy(FIXTURE), [40 / 60, 30 / 40])
    assert math.isnan(producer_accuracy([[3, 0, 0], [0, 2, 0], [0, 0, 0]])[2])


def test_report_text_and_csv():
    other = ConfusionMatrix([[45, 5], [5, 45]])
    report = AccuracyReport(("svm", "mlc"), (ConfusionMatrix(FIXTURE), other))
    text = report.to_text({0: "water", 1: "urban"})
    assert "overall accuracy: 0.7000" in text and "kappa: 0.4000" in text
    assert "water" in text and "Z(svm vs mlc)" in text
    same = AccuracyReport(("a", "b"), (ConfusionMatrix(FIXTURE), ConfusionMatrix(FIXTURE)))
    assert "= 0.0000: not significant at 1.96" in same.to_text()
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == ["section", "name", "key", "value"]
    kap = [r for r in rows if r[:3] == ["summary", "svm", "kappa"]]
    assert float(kap[0][3]) == pytest.approx(0.4)


matrices = st.integers(2, 5).flatmap(
    lambda n: arrays(np.int64, (n, n), elements=st.integers(0, 40)))


@given(matrices, st.randoms(use_true_random=False))
def test_permutation_equivariance(counts, random):
    assume(counts.sum() > 0)
    rows, cols = counts.sum(axis=1), counts.sum(axis=0)
    assume(float(rows @ cols) < float(counts.sum()) ** 2)
    perm = list(range(counts.shape[0]))
    random.shuffle(perm)
    moved = counts[np.ix_(perm, perm)]
    assert overall_accuracy(moved) == pytest.approx(overall_accuracy(counts), abs=1e-15)
    assert kappa(moved, exact=True) == kappa(counts, exact=True)
    assert kappa_variance(moved) == pytest.approx(kappa_variance(counts), rel=1e-9, abs=1e-15)


@given(st.floats(-1, 1), st.floats(0, 1), st.floats(-1, 1), st.floats(1e-6, 1))
def test_z_is_symmetric(k1, v1, k2, v2):
    assert z_compare(k1, v1, k2, v2) == z_compare(k2, v2, k1, v1)


@given(matrices)
def test_kappa_one_iff_diagonal(counts):
    assume(counts.sum() > 0)
    rows, cols = counts.sum(axis=1), counts.sum(axis=0)
    assume(int(rows @ cols) < int(counts.sum()) ** 2)
    diagonal = not np.any(counts - np.diag(np.diag(counts)))
    assert (kappa(counts, exact=True) == 1) == diagonal
    assert kappa(counts) == pytest.approx(kappa_from_counts(counts), abs=1e-12)


@given(st.lists(st.integers(1, 9), min_size=2, max_size=5),
       st.lists(st.integers(1, 9), min_size=2, max_size=5))
def test_independence_gives_zero_kappa(a, b):
    n = min(len(a), len(b))
    rows, cols = np.array(a[:n]), np.array(b[:n])
    cm = np.outer(rows, cols)  # cm_ij = row_i * col_j / N after scaling by N
    assert kappa(cm, exact=True) == 0
    assert abs(kappa(cm)) <= 1e-12
