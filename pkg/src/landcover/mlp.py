"""Feed-forward sigmoid network trained by full-batch backpropagation.

Every hidden and output unit applies the logistic sigmoid. The training loss
is the squared error against one-hot targets, ``1/2 * sum_k (o_k - t_k)^2``,
averaged over the training samples; each epoch takes one gradient step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data_model import DataError, Dataset


class MlpError(ValueError):
    pass


class MlpDivergenceError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class MlpArchitecture:
    layer_sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 3:
            raise MlpError("need an input layer, at least one hidden layer and an output layer")
        if min(sizes) < 1:
            raise MlpError("all layer sizes must be >= 1")
        object.__setattr__(self, "layer_sizes", sizes)

    @classmethod
    def for_dataset(cls, ds: Dataset, hidden=(8,)) -> "MlpArchitecture":
        return cls((ds.dim, *hidden, ds.n_classes))

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class MlpModel:
    """``weights[l]`` has shape ``(units_out, units_in)``; ``biases[l]`` ``(units_out,)``."""

    architecture: MlpArchitecture
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    epochs_run: int = 0
    initial_loss: float = math.nan
    final_loss: float = math.nan
    loss_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        sizes = self.architecture.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise MlpError("one weight matrix and bias vector per layer transition")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[l + 1], sizes[l]) or b.shape != (sizes[l + 1],):
                raise MlpError(f"layer {l} parameters do not match the architecture")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise MlpError(f"layer {l} parameters are not finite")


def init_model(arch: MlpArchitecture, seed: int) -> MlpModel:
    """Weights and biases uniform in [-0.5, 0.5] from a PCG64 stream."""
    rng = np.random.default_rng(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.uniform(-0.5, 0.5, size=(n_out, n_in)))
        biases.append(rng.uniform(-0.5, 0.5, size=n_out))
    return MlpModel(arch, tuple(weights), tuple(biases))


def _activations(weights, biases, X):
    acts = [X]
    for W, b in zip(weights, biases):
        acts.append(expit(acts[-1] @ W.T + b))
    return acts


def _loss(output, targets) -> float:
    return 0.5 * float(np.sum((output - targets) ** 2)) / output.shape[0]


def _backprop(weights, biases, X, T):
    """Loss and its gradients for a batch, averaged over rows."""
    acts = _activations(weights, biases, X)
    n = X.shape[0]
    out = acts[-1]
    delta = (out - T) * out * (1.0 - out) / n
    gW = [None] * len(weights)
    gb = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        gW[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l:
            a = acts[l]
            delta = (delta @ weights[l]) * a * (1.0 - a)
    return _loss(out, T), gW, gb


def one_hot(labels, n_classes: int) -> np.ndarray:
    T = np.zeros((len(labels), n_classes))
    T[np.arange(len(labels)), labels] = 1.0
    return T


def train_mlp(train: Dataset, arch: MlpArchitecture, learning_rate: float = 0.5,
              epochs: int = 1000, seed: int = 0) -> MlpModel:
    if arch.n_inputs != train.dim:
        raise DataError(f"architecture expects {arch.n_inputs} inputs, data has {train.dim}")
    if arch.n_outputs != train.n_classes:
        raise DataError(
            f"architecture has {arch.n_outputs} outputs, data has {train.n_classes} classes")
    if learning_rate < 0 or not math.isfinite(learning_rate):
        raise MlpError("learning_rate must be a finite non-negative number")
    if epochs < 0:
        raise MlpError("epochs must be non-negative")
    init = init_model(arch, seed)
    weights = [W.copy() for W in init.weights]
    biases = [b.copy() for b in init.biases]
    X = train.features
    T = one_hot(train.labels, arch.n_outputs)
    history = []
    for epoch in range(epochs):
        loss, gW, gb = _backprop(weights, biases, X, T)
        if not math.isfinite(loss):
            raise MlpDivergenceError(epoch)
        history.append(loss)
        for l in range(len(weights)):
            weights[l] -= learning_rate * gW[l]
            biases[l] -= learning_rate * gb[l]
    final = _loss(_activations(weights, biases, X)[-1], T)
    if not math.isfinite(final) or not all(np.all(np.isfinite(W)) for W in weights):
        raise MlpDivergenceError(epochs)
    initial = history[0] if history else final
    return MlpModel(arch, tuple(weights), tuple(biases), epochs, initial, final, tuple(history))


def forward_many(model: MlpModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.architecture.n_inputs:
        raise MlpError(f"expected {model.architecture.n_inputs} features, got {X.shape[1]}")
    return _activations(model.weights, model.biases, X)[-1]


def forward(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise MlpError("forward expects a single feature vector")
    return forward_many(model, x[np.newaxis])[0]


def predict_many(model: MlpModel, X) -> np.ndarray:
    return np.argmax(forward_many(model, X), axis=1)


def sample_loss(model: MlpModel, x, target) -> float:
    out = forward(model, x)
    return 0.5 * float(np.sum((out - np.asarray(target, dtype=np.float64)) ** 2))


def gradients(model: MlpModel, x, target):
    """Backprop gradients of the single-sample loss: ``(dW list, db list)``."""
    X = np.asarray(x, dtype=np.float64)[np.newaxis]
    T = np.asarray(target, dtype=np.float64)[np.newaxis]
    _, gW, gb = _backprop(model.weights, model.biases, X, T)
    return gW, gb


def gradient_check(model: MlpModel, x, target, epsilon: float = 1e-5) -> float:
    """Worst relative gap between backprop and central-difference gradients."""
    if not 0 < epsilon <= 1e-2:
        raise MlpError(f"epsilon must lie in (0, 1e-2], got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    gW, gb = gradients(model, x, target)
    params = [W.copy() for W in model.weights] + [b.copy() for b in model.biases]
    analytic = gW + gb
    n_layers = len(model.weights)

    def loss() -> float:
        acts = _activations(params[:n_layers], params[n_layers:], x[np.newaxis])
        return 0.5 * float(np.sum((acts[-1][0] - target) ** 2))

    worst = 0.0
    for P, G in zip(params, analytic):
        flat, gflat = P.reshape(-1), G.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + epsilon
            up = loss()
            flat[i] = old - epsilon
            down = loss()
            flat[i] = old
            fd = (up - down) / (2 * epsilon)
            bp = gflat[i]
            worst = max(worst, abs(bp - fd) / max(1e-12, abs(bp) + abs(fd)))
    return worst


def dumps_mlp(model: MlpModel) -> str:
    g = lambda v: format(float(v), ".17g")  # noqa: E731
    lines = ["mlp", "layers " + " ".join(str(s) for s in model.architecture.layer_sizes)]
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"weights {l}")
        lines += [" ".join(g(v) for v in row) for row in W]
        lines.append("bias " + " ".join(g(v) for v in b))
    return "\n".join(lines) + "\n"


def loads_mlp(text: str) -> MlpModel:
    lines = text.splitlines()
    if not lines or lines[0] != "mlp":
        raise MlpError("not an MLP model file")
    sizes = tuple(int(v) for v in lines[1].split()[1:])
    arch = MlpArchitecture(sizes)
    pos = 2
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        pos += 1
        W = np.array([[float(v) for v in lines[pos + r].split()] for r in range(n_out)])
        pos += n_out
        b = np.array([float(v) for v in lines[pos].split()[1:]])
        pos += 1
        weights.append(W.reshape(n_out, n_in))
        biases.append(b)
    return MlpModel(arch, tuple(weights), tuple(biases))
