"""One-against-one multiclass SVM with majority voting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Dataset, DataError
from .svm import (BinarySvmModel, KernelSpec, SvmError, TrainConfig, format_binary,
                  parse_binary, train_binary)


class PairTrainingError(RuntimeError):
    def __init__(self, class_a: int, class_b: int, cause: Exception):
        super().__init__(f"pair ({class_a}, {class_b}): {cause}")
        self.pair = (class_a, class_b)
        self.cause = cause


@dataclass(frozen=True)
class MulticlassModel:
    """``pairs[k] = (a, b, model)`` with ``a < b``; ``a`` is the +1 side."""

    n_classes: int
    pairs: tuple[tuple[int, int, BinarySvmModel], ...]
    kernel: KernelSpec
    C: float

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise SvmError("a multiclass model needs at least two classes")
        expected = [(a, b) for a in range(self.n_classes) for b in range(a + 1, self.n_classes)]
        if [(a, b) for a, b, _ in self.pairs] != expected:
            raise SvmError("pairs must list every unordered class pair once, in order")

    @property
    def dim(self) -> int:
        for _, _, m in self.pairs:
            if m.n_support:
                return m.dim
        return 0

    @property
    def n_support(self) -> int:
        return sum(m.n_support for _, _, m in self.pairs)


def pair_index(n_classes: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n_classes) for b in range(a + 1, n_classes)]


def train_one_vs_one(train: Dataset, cfg: TrainConfig | None = None,
                     kernel: KernelSpec | None = None) -> MulticlassModel:
    cfg = cfg or TrainConfig()
    kernel = kernel or KernelSpec()
    if train.n_classes < 2:
        raise DataError("one-against-one training needs at least two classes")
    train.require_populated()
    pairs = []
    for a, b in pair_index(train.n_classes):
        idx = np.flatnonzero((train.labels == a) | (train.labels == b))
        y = np.where(train.labels[idx] == a, 1.0, -1.0)
        try:
            model = train_binary(train.features[idx], y, cfg, kernel)
        except (SvmError, RuntimeError) as exc:
            raise PairTrainingError(a, b, exc) from exc
        pairs.append((a, b, model))
    return MulticlassModel(train.n_classes, tuple(pairs), kernel, float(cfg.C))


def vote_tallies(model: MulticlassModel, X) -> np.ndarray:
    """Votes per class for each row of ``X``; shape ``(n_samples, n_classes)``.

    A pair model gives its vote to class ``a`` when the decision value is
    ``>= 0`` and to class ``b`` otherwise.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    dim = model.dim
    if dim and X.shape[1] != dim:
        raise SvmError(f"expected {dim} features, got {X.shape[1]}")
    votes = np.zeros((X.shape[0], model.n_classes), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for a, b, m in model.pairs:
        winner = np.where(m.decision_values(X) >= 0, a, b)
        np.add.at(votes, (rows, winner), 1)
    return votes


def vote_tally(model: MulticlassModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SvmError("vote_tally expects a single feature vector")
    return vote_tallies(model, x[np.newaxis])[0]


def predict_many(model: MulticlassModel, X) -> np.ndarray:
    # argmax returns the first maximum, i.e. the lowest class id among ties
    return np.argmax(vote_tallies(model, X), axis=1)


def predict(model: MulticlassModel, x) -> int:
    return int(np.argmax(vote_tally(model, x)))


def format_multiclass(model: MulticlassModel) -> list[str]:
    lines = [
        "svm-ovo",
        f"n_classes {model.n_classes}",
        f"kernel {model.kernel.kind}",
        f"gamma {format(model.kernel.gamma, '.17g')}",
        f"C {format(model.C, '.17g')}",
        f"pairs {len(model.pairs)}",
    ]
    for a, b, m in model.pairs:
        lines.append(f"pair {a} {b}")
        lines.extend(format_binary(m))
    return lines


def dumps_multiclass(model: MulticlassModel) -> str:
    return "\n".join(format_multiclass(model)) + "\n"


def loads_multiclass(text: str) -> MulticlassModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "svm-ovo":
        raise SvmError("not a one-against-one model file")
    head = {}
    for pos in range(1, 6):
        key, _, value = lines[pos].partition(" ")
        head[key] = value.strip()
    pos = 6
    pairs = []
    for _ in range(int(head["pairs"])):
        key, a, b = lines[pos].split()
        if key != "pair":
            raise SvmError(f"line {pos + 1}: expected 'pair a b'")
        m, pos = parse_binary(lines, pos + 1)
        pairs.append((int(a), int(b), m))
    return MulticlassModel(int(head["n_classes"]), tuple(pairs),
                           KernelSpec(head["kernel"], float(head["gamma"])), float(head["C"]))
