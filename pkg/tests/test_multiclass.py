import numpy as np
import pytest
from hypothesis import given, strategies as st

from landcover.data_model import DataError, Dataset
from landcover.multiclass import (MulticlassModel, PairTrainingError, dumps_multiclass,
                                  loads_multiclass, pair_index, predict, predict_many,
                                  train_one_vs_one, vote_tallies, vote_tally)
from landcover.svm import BinarySvmModel, KernelSpec, TrainConfig, train_binary

LINEAR = KernelSpec("linear")


def stub(sign: float) -> BinarySvmModel:
    """1-D linear model whose decision value at x=1 is ``sign``."""
    return BinarySvmModel([[1.0]], [sign], [1.0], 0.0, LINEAR, 1.0)


def crafted(signs) -> MulticlassModel:
    pairs = pair_index(3)
    return MulticlassModel(3, tuple((a, b, stub(s)) for (a, b), s in zip(pairs, signs)),
                           LINEAR, 1.0)


def ring_dataset(n_classes, per_class=6, seed=0):
    r = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    centres = 4 * np.c_[np.cos(angles), np.sin(angles)]
    X = np.vstack([c + 0.5 * r.standard_normal((per_class, 2)) for c in centres])
    return Dataset(X, np.repeat(np.arange(n_classes), per_class))


@pytest.mark.parametrize("n, expected", [(2, 1), (7, 21), (8, 28)])
def test_pair_counts(n, expected):
    model = train_one_vs_one(ring_dataset(n), TrainConfig(C=10.0))
    assert len(model.pairs) == expected
    assert [(a, b) for a, b, _ in model.pairs] == pair_index(n)
    X = np.random.default_rng(1).uniform(-6, 6, size=(50, 2))
    assert np.all(vote_tallies(model, X).sum(axis=1) == expected)


def test_unanimous_votes():
    model = crafted([1.0, 1.0, 1.0])  # 0 beats 1, 0 beats 2, 1 beats 2
    assert list(vote_tally(model, [1.0])) == [2, 1, 0]
    assert predict(model, [1.0]) == 0


def test_cyclic_tie_goes_to_lowest_id():
    model = crafted([1.0, -1.0, 1.0])  # 0 beats 1, 2 beats 0, 1 beats 2
    assert list(vote_tally(model, [1.0])) == [1, 1, 1]
    assert predict(model, [1.0]) == 0


def test_single_winner_in_middle():
    model = crafted([-1.0, 1.0, 1.0])  # 1 beats 0, 0 beats 2, 1 beats 2
    assert list(vote_tally(model, [1.0])) == [1, 2, 0]
    assert predict(model, [1.0]) == 1


def test_pairs_must_be_complete():
    with pytest.raises(ValueError):
        MulticlassModel(3, ((0, 1, stub(1.0)),), LINEAR, 1.0)


def test_empty_class_is_named():
    ds = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([0, 0, 2]),
                 {0: "water", 1: "forest", 2: "urban"})
    with pytest.raises(DataError, match="forest"):
        train_one_vs_one(ds)


def test_pair_failure_carries_pair():
    ds = ring_dataset(3)
    with pytest.raises(PairTrainingError) as info:
        train_one_vs_one(ds, TrainConfig(C=1e6, max_passes=1))
    assert info.value.pair == (0, 1)


def test_dimension_mismatch():
    model = train_one_vs_one(ring_dataset(3), TrainConfig(C=10.0))
    with pytest.raises(ValueError):
        vote_tally(model, [1.0, 2.0, 3.0])


def test_pair_models_match_restricted_retraining(blobs):
    cfg = TrainConfig(C=10.0)
    model = train_one_vs_one(blobs, cfg)
    for a, b, m in model.pairs:
        idx = np.flatnonzero((blobs.labels == a) | (blobs.labels == b))
        y = np.where(blobs.labels[idx] == a, 1.0, -1.0)
        again = train_binary(blobs.features[idx], y, cfg, KernelSpec())
        np.testing.assert_array_equal(again.sv_indices, m.sv_indices)
        np.testing.assert_array_equal(again.alphas, m.alphas)


def test_persistence_roundtrip(blobs):
    model = train_one_vs_one(blobs, TrainConfig(C=10.0))
    text = dumps_multiclass(model)
    assert text.startswith("svm-ovo\n")
    back = loads_multiclass(text)
    assert dumps_multiclass(back) == text
    X = np.random.default_rng(2).uniform(-1, 4, size=(100, 2))
    np.testing.assert_array_equal(predict_many(back, X), predict_many(model, X))


def test_fits_separable_blobs(blobs):
    model = train_one_vs_one(blobs, TrainConfig(C=10.0))
    assert np.mean(predict_many(model, blobs.features) == blobs.labels) == 1.0


@given(st.integers(2, 6), st.integers(0, 1000))
def test_votes_conserved_and_predictions_in_range(n, seed):
    model = train_one_vs_one(ring_dataset(n, per_class=4, seed=seed), TrainConfig(C=5.0))
    X = np.random.default_rng(seed).uniform(-8, 8, size=(30, 2))
    votes = vote_tallies(model, X)
    assert np.all(votes.sum(axis=1) == n * (n - 1) // 2) and np.all(votes >= 0)
    pred = predict_many(model, X)
    assert np.all((pred >= 0) & (pred < n))
    np.testing.assert_array_equal(pred, np.argmax(votes, axis=1))
