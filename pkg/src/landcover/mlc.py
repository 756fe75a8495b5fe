"""Gaussian maximum-likelihood classifier.

Each class ``k`` scores a pixel ``x`` with

    g_k(x) = ln p_k - 1/2 ln|S_k| - 1/2 (x - m_k)^T S_k^{-1} (x - m_k)

and the pixel goes to the highest-scoring class (lowest id among ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data_model import DataError, Dataset

CONDITION_LIMIT = 1e12
RIDGE_SCALE = 1e-6


class MlcError(ValueError):
    pass


@dataclass(frozen=True)
class ClassGaussian:
    prior: float
    mean: np.ndarray
    covariance: np.ndarray  # after any ridge
    precision: np.ndarray
    log_det: float
    regularized: bool

    @classmethod
    def from_covariance(cls, prior: float, mean, cov, regularize: bool = True) -> "ClassGaussian":
        cov = np.array(cov, dtype=np.float64)
        cov = 0.5 * (cov + cov.T)
        d = cov.shape[0]
        flagged = False
        if regularize and _condition(cov) > CONDITION_LIMIT:
            eps = RIDGE_SCALE * max(np.trace(cov), 0.0) / d
            if eps <= 0:
                eps = RIDGE_SCALE
            cov = cov + eps * np.eye(d)
            flagged = True
        try:
            factor = cho_factor(cov, lower=True)
        except np.linalg.LinAlgError:
            raise MlcError("covariance is not positive definite") from None
        log_det = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
        precision = cho_solve(factor, np.eye(d))
        precision = 0.5 * (precision + precision.T)
        return cls(float(prior), np.asarray(mean, dtype=np.float64), cov, precision,
                   log_det, flagged)


def _condition(cov: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 0:
        return math.inf
    return float(eig[-1] / eig[0])


@dataclass(frozen=True)
class MlcModel:
    classes: tuple[ClassGaussian, ...]

    def __post_init__(self) -> None:
        if not self.classes:
            raise MlcError("an MLC model needs at least one class")
        if len({c.mean.size for c in self.classes}) != 1:
            raise MlcError("class means differ in dimension")
        priors = np.array([c.prior for c in self.classes])
        if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-9:
            raise MlcError("class priors must be positive and sum to 1")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return int(self.classes[0].mean.size)

    @property
    def regularized(self) -> list[bool]:
        return [c.regularized for c in self.classes]


def fit_mlc(train: Dataset, priors=None) -> MlcModel:
    """Estimate per-class means and unbiased covariances.

    ``priors`` may be ``None``/``"uniform"``, ``"frequency"`` (training class
    proportions) or an explicit sequence summing to one.
    """
    train.require_populated()
    counts = train.class_counts()
    n = train.n_classes
    for k in range(n):
        if counts[k] < 2:
            raise DataError(
                f"class {train.class_names[k]} has {counts[k]} sample(s); need at least 2")
    if priors is None or (isinstance(priors, str) and priors == "uniform"):
        p = np.full(n, 1.0 / n)
    elif isinstance(priors, str) and priors == "frequency":
        p = counts / counts.sum()
    elif isinstance(priors, str):
        raise MlcError(f"unknown prior scheme {priors!r}")
    else:
        p = np.asarray(priors, dtype=np.float64)
        if p.shape != (n,) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
            raise MlcError("priors must be positive, one per class, and sum to 1")
    classes = []
    for k in range(n):
        Xk = train.features[train.labels == k]
        mean = Xk.mean(axis=0)
        cov = np.atleast_2d(np.cov(Xk, rowvar=False, ddof=1))
        classes.append(ClassGaussian.from_covariance(p[k], mean, cov))
    return MlcModel(tuple(classes))


def discriminants(model: MlcModel, X) -> np.ndarray:
    """All class scores for each row of ``X``; shape ``(n_samples, n_classes)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise MlcError(f"expected {model.dim} features, got {X.shape[1]}")
    out = np.empty((X.shape[0], model.n_classes))
    for k, c in enumerate(model.classes):
        D = X - c.mean
        maha = np.einsum("ij,jk,ik->i", D, c.precision, D)
        out[:, k] = math.log(c.prior) - 0.5 * c.log_det - 0.5 * maha
    return out


def discriminant(model: MlcModel, k: int, x) -> float:
    if not 0 <= k < model.n_classes:
        raise MlcError(f"class id {k} outside 0..{model.n_classes - 1}")
    c = model.classes[k]
    x = np.asarray(x, dtype=np.float64)
    if x.shape != c.mean.shape:
        raise MlcError(f"expected {model.dim} features, got {x.size}")
    d = x - c.mean
    return math.log(c.prior) - 0.5 * c.log_det - 0.5 * float(d @ c.precision @ d)


def classify_many(model: MlcModel, X) -> np.ndarray:
    return np.argmax(discriminants(model, X), axis=1)


def classify_mlc(model: MlcModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    return int(classify_many(model, x[np.newaxis])[0])


def dumps_mlc(model: MlcModel) -> str:
    g = lambda v: format(float(v), ".17g")  # noqa: E731
    lines = ["mlc", f"n_classes {model.n_classes}", f"dim {model.dim}"]
    for k, c in enumerate(model.classes):
        lines += [f"class {k}", f"prior {g(c.prior)}", f"regularized {int(c.regularized)}",
                  "mean " + " ".join(g(v) for v in c.mean)]
        lines += ["cov " + " ".join(g(v) for v in row) for row in c.covariance]
    return "\n".join(lines) + "\n"


def loads_mlc(text: str) -> MlcModel:
    lines = text.splitlines()
    if not lines or lines[0] != "mlc":
        raise MlcError("not an MLC model file")
    n = int(lines[1].split()[1])
    d = int(lines[2].split()[1])
    pos = 3
    classes = []
    for _ in range(n):
        prior = float(lines[pos + 1].split()[1])
        flagged = bool(int(lines[pos + 2].split()[1]))
        mean = [float(v) for v in lines[pos + 3].split()[1:]]
        cov = [[float(v) for v in lines[pos + 4 + r].split()[1:]] for r in range(d)]
        c = ClassGaussian.from_covariance(prior, mean, cov, regularize=False)
        classes.append(ClassGaussian(c.prior, c.mean, c.covariance, c.precision,
                                     c.log_det, flagged))
        pos += 4 + d
    return MlcModel(tuple(classes))
