"""Binary soft-margin kernel SVM trained by sequential minimal optimization.

The solver maximizes the box-constrained dual

    L(lam) = sum_i lam_i - 1/2 sum_ij lam_i lam_j y_i y_j K(x_i, x_j)
    subject to 0 <= lam_i <= C and sum_i lam_i y_i = 0

two multipliers at a time. Each step picks the maximal violating pair: the
first index is the worst KKT violator among points whose ``y*lam`` may grow,
the second maximizes ``|E_1 - E_2|`` among points whose ``y*lam`` may shrink.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.spatial.distance import cdist

FULL_GRAM_LIMIT = 4096
ROW_CACHE_SIZE = 1024
POLISH_EVERY = 20
POLISH_MAX_FREE = 400


class SvmError(ValueError):
    """Invalid SVM input or configuration."""


class SvmConvergenceError(RuntimeError):
    """Raised when the solver exhausts ``max_passes`` before reaching tolerance.

    ``alphas``, ``bias`` and ``gap`` describe the best iterate seen.
    """

    def __init__(self, message: str, alphas: np.ndarray, bias: float, gap: float):
        super().__init__(message)
        self.alphas = alphas
        self.bias = bias
        self.gap = gap


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "rbf"):
            raise SvmError(f"unknown kernel kind {self.kind!r}; expected 'linear' or 'rbf'")
        if self.kind == "rbf" and not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise SvmError(f"rbf kernel needs gamma > 0, got {self.gamma}")


@dataclass(frozen=True)
class TrainConfig:
    C: float = 5000.0
    kkt_tolerance: float = 1e-3
    max_passes: int = 100_000

    def __post_init__(self) -> None:
        if not (self.C > 0 and math.isfinite(self.C)):
            raise SvmError(f"C must satisfy C > 0, got {self.C}")
        if not self.kkt_tolerance > 0:
            raise SvmError(f"kkt_tolerance must be > 0, got {self.kkt_tolerance}")
        if int(self.max_passes) < 1:
            raise SvmError(f"max_passes must be a positive integer, got {self.max_passes}")


@dataclass(frozen=True)
class BinarySvmModel:
    """Kernel expansion ``f(x) = sum_i y_i lam_i K(s_i, x) + b`` over support vectors.

    ``sv_indices`` records the position of each support vector in the training
    set when known; models read back from disk carry ``None``.
    """

    support_vectors: np.ndarray
    sv_labels: np.ndarray
    alphas: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    sv_indices: np.ndarray | None = None
    w_explicit: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        sv = np.array(self.support_vectors, dtype=np.float64)
        if sv.ndim == 1:
            sv = sv.reshape(0, sv.size) if sv.size == 0 else sv.reshape(1, -1)
        labels = np.array(self.sv_labels, dtype=np.float64).reshape(-1)
        alphas = np.array(self.alphas, dtype=np.float64).reshape(-1)
        if not (labels.size == alphas.size == sv.shape[0]):
            raise SvmError("support vectors, labels and multipliers differ in length")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise SvmError("support-vector labels must be -1 or +1")
        if np.any(alphas <= 0) or np.any(alphas > self.C):
            raise SvmError("stored multipliers must lie in (0, C]")
        for arr in (sv, labels, alphas):
            arr.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "sv_labels", labels)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "bias", float(self.bias))
        if self.sv_indices is not None:
            idx = np.array(self.sv_indices, dtype=np.int64)
            idx.setflags(write=False)
            object.__setattr__(self, "sv_indices", idx)
        if self.kernel.kind == "linear" and sv.shape[0]:
            w = (labels * alphas) @ sv
            w.setflags(write=False)
            object.__setattr__(self, "w_explicit", w)
        else:
            object.__setattr__(self, "w_explicit", None)

    @property
    def dim(self) -> int:
        return int(self.support_vectors.shape[1])

    @property
    def n_support(self) -> int:
        return int(self.alphas.size)

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.n_support and X.shape[1] != self.dim:
            raise SvmError(f"expected {self.dim} features, got {X.shape[1]}")
        if self.n_support == 0:
            return np.full(X.shape[0], self.bias)
        K = kernel_matrix(self.kernel, self.support_vectors, X)
        return (self.sv_labels * self.alphas) @ K + self.bias


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise SvmError(f"kernel arguments differ in dimension: {x.shape} vs {y.shape}")
    if spec.kind == "linear":
        return float(x @ y)
    diff = x - y
    return math.exp(-spec.gamma * float(diff @ diff))


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise SvmError(f"kernel arguments differ in dimension: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "linear":
        return A @ B.T
    return np.exp(-spec.gamma * cdist(A, B, "sqeuclidean"))


class KernelCache:
    """Kernel rows for a fixed training set.

    Small problems keep the whole Gram matrix; larger ones hold the most
    recently used rows only.
    """

    def __init__(self, spec: KernelSpec, X: np.ndarray, capacity: int = ROW_CACHE_SIZE):
        self.spec = spec
        self.X = X
        self.capacity = capacity
        self._full = kernel_matrix(spec, X, X) if X.shape[0] <= FULL_GRAM_LIMIT else None
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        if self._full is None:
            self._diag = np.array([kernel_eval(spec, x, x) for x in X])
        else:
            self._diag = np.diag(self._full).copy()

    def row(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        hit = self._rows.get(i)
        if hit is not None:
            self._rows.move_to_end(i)
            return hit
        r = kernel_matrix(self.spec, self.X[i:i + 1], self.X)[0]
        self._rows[i] = r
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return r

    def diag(self, i: int) -> float:
        return float(self._diag[i])


def _as_binary_problem(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.size:
        raise SvmError("samples and labels differ in length")
    if X.shape[0] == 0:
        raise SvmError("training set is empty")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("binary labels must be -1 or +1")
    if not np.all(np.isfinite(X)):
        raise SvmError("training features must be finite")
    return X, y


def _violating_sets(alpha, y, C):
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    return up, low


def _gap_and_bias(alpha, y, err, C):
    """Optimality gap ``m - M`` and the bias implied by the current iterate."""
    up, low = _violating_sets(alpha, y, C)
    m = float(np.max(-err[up])) if up.any() else -math.inf
    M = float(np.min(-err[low])) if low.any() else math.inf
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(np.mean(-err[free]))
    elif math.isfinite(m) and math.isfinite(M):
        bias = 0.5 * (m + M)
    else:
        bias = m if math.isfinite(m) else M
    return m - M, bias


def train_binary(X, y, cfg: TrainConfig | None = None,
                 kernel: KernelSpec | None = None) -> BinarySvmModel:
    cfg = cfg or TrainConfig()
    kernel = kernel or KernelSpec()
    X, y = _as_binary_problem(X, y)
    if not ((y > 0).any() and (y < 0).any()):
        raise SvmError("training set must contain both +1 and -1 labels")
    C = float(cfg.C)
    tol = float(cfg.kkt_tolerance)
    n = y.size
    cache = KernelCache(kernel, X)
    alpha = np.zeros(n)
    # f[k] = sum_j y_j alpha_j K(x_j, x_k), the decision value without bias
    f = np.zeros(n)
    updates = 0

    while True:
        err = f - y
        gap, bias = _gap_and_bias(alpha, y, err, C)
        if gap <= tol:
            # guard against drift in the incrementally maintained outputs
            f_exact = _outputs(cache, alpha, y)
            if np.max(np.abs(f_exact - f), initial=0.0) > 1e-3 * tol:
                f = f_exact
                continue
            break
        if updates >= cfg.max_passes:
            raise SvmConvergenceError(
                f"SMO did not reach KKT tolerance {tol} after {updates} pair updates "
                f"(gap {gap:.3e})", alpha.copy(), bias, gap)
        step = _take_step_with_fallback(cache, alpha, y, err, C, tol)
        if step is None:
            raise SvmConvergenceError(
                f"SMO stalled with gap {gap:.3e}: no violating pair makes progress",
                alpha.copy(), bias, gap)
        i, j, di, dj = step
        f += y[i] * di * cache.row(i) + y[j] * dj * cache.row(j)
        updates += 1
        if updates % max(POLISH_EVERY, n) == 0 and _polish_free_set(cache, alpha, y, C):
            f = _outputs(cache, alpha, y)

    keep = alpha > 0
    return BinarySvmModel(
        support_vectors=X[keep], sv_labels=y[keep], alphas=alpha[keep],
        bias=bias, kernel=kernel, C=C, sv_indices=np.flatnonzero(keep))


def _outputs(cache: KernelCache, alpha, y) -> np.ndarray:
    f = np.zeros(alpha.size)
    for k in np.flatnonzero(alpha > 0):
        f += y[k] * alpha[k] * cache.row(k)
    return f


def _polish_free_set(cache, alpha, y, C) -> bool:
    """Step toward the dual maximum over the current free set; updates ``alpha``.

    Multipliers at 0 or C are held fixed and the equality-constrained KKT
    system on the free ones is solved by least squares. If it is consistent,
    the solution maximizes the dual on that face and we move toward it. If it
    is not, the face objective is unbounded and the least-squares residual is
    a zero-curvature ascent direction, which we follow to the box. Either way
    the objective cannot drop. Plain SMO crawls along such flat directions
    one pair step at a time when C is large.
    """
    inside = (alpha > 0) & (alpha < C)
    free = np.flatnonzero(inside)
    if free.size < 2 or free.size > POLISH_MAX_FREE:
        return False
    fixed = np.flatnonzero(~inside & (alpha > 0))
    rows = np.array([cache.row(k) for k in free])
    yf = y[free]
    Q_ff = (yf[:, None] * yf[None, :]) * rows[:, free]
    lin = np.ones(free.size)
    if fixed.size:
        lin -= yf * (rows[:, fixed] @ (y[fixed] * alpha[fixed]))
    A = np.zeros((free.size + 1, free.size + 1))
    A[:-1, :-1] = Q_ff
    A[:-1, -1] = yf
    A[-1, :-1] = yf
    rhs = np.append(lin, float(yf @ alpha[free]))
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    residual = rhs - A @ sol
    old = alpha[free].copy()
    if np.linalg.norm(residual) > 1e-9 * (1.0 + np.linalg.norm(rhs)):
        d = residual[:-1]
        slope = float((lin - Q_ff @ old) @ d)
        if slope == 0:
            return False
        d = d if slope > 0 else -d
        cap = np.inf
    else:
        d = sol[:-1] - old
        cap = 1.0
    if not np.all(np.isfinite(d)) or not np.any(d):
        return False
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(d > 0, (C - old) / d, np.where(d < 0, -old / d, np.inf))
    t = min(cap, float(room.min()))
    if not math.isfinite(t) or t <= 0:
        return False
    trial = np.array([_snap(v, C) for v in np.clip(old + t * d, 0.0, C)])
    # snapping may disturb y.alpha by a few ulps; absorb that in the roomiest free entry
    drift = float(yf @ (trial - old))
    if drift:
        room_left = np.minimum(trial, C - trial)
        k = int(np.argmax(room_left))
        if room_left[k] <= abs(drift):
            return False
        trial[k] -= yf[k] * drift
    if _free_objective(Q_ff, lin, trial) < _free_objective(Q_ff, lin, old):
        return False
    alpha[free] = trial
    return True


def _free_objective(Q_ff, lin, a) -> float:
    return float(lin @ a - 0.5 * a @ Q_ff @ a)


def _take_step_with_fallback(cache, alpha, y, err, C, tol):
    up, low = _violating_sets(alpha, y, C)
    score = -err
    i = int(np.flatnonzero(up)[np.argmax(score[up])])
    lows = np.flatnonzero(low)
    j = int(lows[np.argmin(score[lows])])
    step = _pair_update(cache, alpha, y, err, C, i, j)
    if step is not None:
        return step
    # sequential scan over remaining violating pairs, in index order
    for i in np.flatnonzero(up):
        for j in lows:
            if score[i] - score[j] <= tol or i == j:
                continue
            step = _pair_update(cache, alpha, y, err, C, int(i), int(j))
            if step is not None:
                return step
    return None


def _pair_update(cache, alpha, y, err, C, i, j):
    """Analytic two-multiplier step; updates ``alpha`` in place.

    Returns ``(i, j, delta_i, delta_j)`` or ``None`` when the pair cannot move.
    """
    if i == j:
        return None
    yi, yj = y[i], y[j]
    ai, aj = alpha[i], alpha[j]
    s = yi * yj
    if s < 0:
        lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
    else:
        lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
    if hi - lo <= 0:
        return None
    kii, kjj = cache.diag(i), cache.diag(j)
    kij = float(cache.row(i)[j])
    eta = kii + kjj - 2.0 * kij
    slope = yj * (err[i] - err[j])
    if eta > 1e-12:
        aj_new = min(max(aj + slope / eta, lo), hi)
    else:
        # flat curvature: the dual is linear along this pair, move to the ascent end
        if abs(slope) <= 0:
            return None
        aj_new = hi if slope > 0 else lo
    aj_new = _snap(aj_new, C)
    dj = aj_new - aj
    if abs(dj) <= 1e-15 * max(1.0, C):
        return None
    ai_new = _snap(ai - s * dj, C)
    di = ai_new - ai
    alpha[i], alpha[j] = ai_new, aj_new
    return i, j, di, dj


def _snap(a: float, C: float) -> float:
    """Pin values within a few ulps of the box ends to the ends themselves."""
    eps = 8 * np.spacing(C)
    if a < eps:
        return 0.0
    if a > C - eps:
        return C
    return a


def decision_value(model: BinarySvmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SvmError("decision_value expects a single feature vector")
    if model.n_support and x.size != model.dim:
        raise SvmError(f"expected {model.dim} features, got {x.size}")
    return float(model.decision_values(x[np.newaxis])[0])


def _full_alphas(model: BinarySvmModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Multipliers for every training point; non-support points get zero."""
    alpha = np.zeros(y.size)
    if model.n_support == 0:
        return alpha
    if model.sv_indices is not None and model.sv_indices.size == model.n_support \
            and model.sv_indices.max(initial=-1) < y.size \
            and np.array_equal(X[model.sv_indices], model.support_vectors):
        alpha[model.sv_indices] = model.alphas
        return alpha
    used = np.zeros(y.size, dtype=bool)
    for sv, lab, a in zip(model.support_vectors, model.sv_labels, model.alphas):
        match = np.flatnonzero(~used & (y == lab) & np.all(X == sv, axis=1))
        if match.size == 0:
            raise SvmError("support vector not found in the given training set")
        used[match[0]] = True
        alpha[match[0]] = a
    return alpha


def dual_objective(model: BinarySvmModel, X, y) -> float:
    X, y = _as_binary_problem(X, y)
    alpha = _full_alphas(model, X, y)
    if not alpha.any():
        return 0.0
    v = alpha * y
    K = kernel_matrix(model.kernel, X, X)
    return float(alpha.sum() - 0.5 * v @ K @ v)


def kkt_violation(model: BinarySvmModel, X, y, C: float | None = None) -> float:
    """Largest violation of the box KKT conditions over the training set.

    With ``m_i = y_i f(x_i)``: a zero multiplier needs ``m_i >= 1``, a free one
    ``m_i == 1`` and one at the bound ``C`` needs ``m_i <= 1``.
    """
    X, y = _as_binary_problem(X, y)
    C = model.C if C is None else float(C)
    alpha = _full_alphas(model, X, y)
    margins = y * model.decision_values(X)
    at_zero = alpha <= 0
    at_bound = alpha >= C * (1 - 1e-12)
    free = ~at_zero & ~at_bound
    viol = np.zeros(y.size)
    viol[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    viol[free] = np.abs(margins[free] - 1.0)
    viol[at_bound] = np.maximum(0.0, margins[at_bound] - 1.0)
    return float(viol.max())


def slack(model: BinarySvmModel, X, y) -> np.ndarray:
    """Recovered slack variables ``max(0, 1 - y f(x))``."""
    X, y = _as_binary_problem(X, y)
    return np.maximum(0.0, 1.0 - y * model.decision_values(X))


# ---------------------------------------------------------------- persistence

def _g(v: float) -> str:
    return format(float(v), ".17g")


def format_binary(model: BinarySvmModel) -> list[str]:
    dim = model.dim if model.n_support else 0
    lines = [
        "svm-binary",
        f"kernel {model.kernel.kind}",
        f"gamma {_g(model.kernel.gamma)}",
        f"C {_g(model.C)}",
        f"bias {_g(model.bias)}",
        f"dim {dim}",
        f"nsv {model.n_support}",
    ]
    for sv, lab, a in zip(model.support_vectors, model.sv_labels, model.alphas):
        lines.append(" ".join([str(int(lab)), _g(a), *(_g(v) for v in sv)]))
    return lines


def _expect(lines, pos: int, key: str) -> tuple[str, int]:
    if pos >= len(lines):
        raise SvmError(f"model text ended early; expected '{key}'")
    parts = lines[pos].split(None, 1)
    if not parts or parts[0] != key:
        raise SvmError(f"line {pos + 1}: expected '{key}', found {lines[pos]!r}")
    return (parts[1] if len(parts) > 1 else ""), pos + 1


def parse_binary(lines: list[str], pos: int = 0) -> tuple[BinarySvmModel, int]:
    if pos >= len(lines) or lines[pos].strip() != "svm-binary":
        raise SvmError(f"line {pos + 1}: expected 'svm-binary'")
    pos += 1
    kind, pos = _expect(lines, pos, "kernel")
    gamma, pos = _expect(lines, pos, "gamma")
    C, pos = _expect(lines, pos, "C")
    bias, pos = _expect(lines, pos, "bias")
    dim, pos = _expect(lines, pos, "dim")
    nsv, pos = _expect(lines, pos, "nsv")
    dim, nsv = int(dim), int(nsv)
    svs, labels, alphas = [], [], []
    for _ in range(nsv):
        if pos >= len(lines):
            raise SvmError("model text ended inside the support-vector block")
        parts = lines[pos].split()
        if len(parts) != dim + 2:
            raise SvmError(f"line {pos + 1}: expected {dim + 2} fields")
        labels.append(float(parts[0]))
        alphas.append(float(parts[1]))
        svs.append([float(v) for v in parts[2:]])
        pos += 1
    model = BinarySvmModel(
        support_vectors=np.array(svs, dtype=np.float64).reshape(nsv, dim),
        sv_labels=labels, alphas=alphas, bias=float(bias),
        kernel=KernelSpec(kind.strip(), float(gamma)), C=float(C))
    return model, pos


def dumps_binary(model: BinarySvmModel) -> str:
    return "\n".join(format_binary(model)) + "\n"


def loads_binary(text: str) -> BinarySvmModel:
    model, _ = parse_binary(text.splitlines())
    return model


def train_accuracy(model: BinarySvmModel, X, y) -> float:
    X, y = _as_binary_problem(X, y)
    pred = np.where(model.decision_values(X) >= 0, 1.0, -1.0)
    return float(np.mean(pred == y))


def linear_weights(model: BinarySvmModel) -> np.ndarray:
    if model.kernel.kind != "linear":
        raise SvmError("explicit weights exist only for the linear kernel")
    if model.w_explicit is None:
        raise SvmError("model has no support vectors")
    return model.w_explicit


__all__: Iterable[str] = [
    "KernelSpec", "TrainConfig", "BinarySvmModel", "SvmError", "SvmConvergenceError",
    "kernel_eval", "kernel_matrix", "train_binary", "decision_value",
    "dual_objective", "kkt_violation", "slack", "dumps_binary", "loads_binary",
]
