"""Synthetic labelled scenes and the feature-count sweep experiment."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .data_model import Dataset, DataError
from .mlc import classify_many, fit_mlc
from .mlp import MlpArchitecture, predict_many as mlp_predict, train_mlp
from .multiclass import predict_many as svm_predict, train_one_vs_one
from .svm import KernelSpec, TrainConfig

CLASSIFIERS = ("svm", "mlc", "mlp")


@dataclass(frozen=True)
class SceneSpec:
    """Per-class Gaussian clusters.

    ``covariances`` is ``(n_classes, dims, dims)``; when omitted class ``k``
    uses ``noise_std[k]**2 * I`` (a scalar ``noise_std`` applies to all).
    With ``warp`` set, every coordinate ``v`` is passed through the monotone
    map ``v + 0.1 * sin(2*pi*v)`` after sampling.
    """

    means: np.ndarray
    train_per_class: int = 20
    test_per_class: int = 200
    seed: int = 0
    noise_std: float | tuple[float, ...] = 0.05
    covariances: np.ndarray | None = None
    warp: bool = False

    def __post_init__(self) -> None:
        means = np.array(self.means, dtype=np.float64)
        if means.ndim != 2 or means.shape[0] < 2 or means.shape[1] < 1:
            raise DataError("means must be (n_classes >= 2, dims >= 1)")
        if self.train_per_class < 2 or self.test_per_class < 2:
            raise DataError("need at least 2 train and 2 test samples per class")
        std = np.broadcast_to(np.asarray(self.noise_std, dtype=np.float64), (means.shape[0],))
        if self.covariances is None and not np.all(std > 0):
            raise DataError("noise_std must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "noise_std", tuple(float(v) for v in std))
        if self.covariances is not None:
            cov = np.array(self.covariances, dtype=np.float64)
            if cov.shape != (means.shape[0], means.shape[1], means.shape[1]):
                raise DataError("covariances must be (n_classes, dims, dims)")
            object.__setattr__(self, "covariances", cov)

    @property
    def n_classes(self) -> int:
        return int(self.means.shape[0])

    @property
    def dims(self) -> int:
        return int(self.means.shape[1])

    def cholesky_factors(self) -> list[np.ndarray]:
        if self.covariances is None:
            return [s * np.eye(self.dims) for s in self.noise_std]
        factors = []
        for k, cov in enumerate(self.covariances):
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise DataError(f"covariance of class {k} is not symmetric")
            try:
                factors.append(np.linalg.cholesky(cov))
            except np.linalg.LinAlgError:
                raise DataError(f"covariance of class {k} is not positive definite") from None
        return factors


def simplex_means(n_classes: int = 8, dims: int = 65, signal: float = 0.25,
                  offset: float = 0.3, seed: int = 7) -> np.ndarray:
    """Class means on a regular simplex, projected feature by feature.

    Feature ``f`` (1-based) reads the simplex through its own random unit
    direction scaled by ``signal / sqrt(f)``, so later features separate the
    classes less but never carry zero information.
    """
    rng = np.random.default_rng(seed)
    vertices = np.eye(n_classes) - 1.0 / n_classes
    vertices /= np.linalg.norm(vertices[0])
    directions = rng.normal(size=(dims, n_classes))
    directions -= directions.mean(axis=1, keepdims=True)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    scale = signal / np.sqrt(np.arange(1, dims + 1))
    return offset + vertices @ (directions * scale[:, None]).T


def default_scene(train_per_class: int = 20, test_per_class: int = 200, seed: int = 0,
                  n_classes: int = 8, dims: int = 65) -> SceneSpec:
    """Reflectance-scaled scene: classes differ in spread (std 0.04 to 0.07)."""
    noise = tuple(np.geomspace(0.04, 0.07, n_classes))
    return SceneSpec(simplex_means(n_classes, dims), train_per_class, test_per_class, seed, noise)


def _warp(v: np.ndarray) -> np.ndarray:
    return v + 0.1 * np.sin(2 * np.pi * v)


def generate_scene(spec: SceneSpec) -> tuple[Dataset, Dataset]:
    factors = spec.cholesky_factors()
    rng = np.random.default_rng(spec.seed)
    parts = {}
    for split, count in (("train", spec.train_per_class), ("test", spec.test_per_class)):
        X, y = [], []
        for k in range(spec.n_classes):
            z = rng.standard_normal((count, spec.dims))
            X.append(spec.means[k] + z @ factors[k].T)
            y.append(np.full(count, k))
        X = np.vstack(X)
        if spec.warp:
            X = _warp(X)
        parts[split] = Dataset(X, np.concatenate(y))
    return parts["train"], parts["test"]


def add_stripes(band, period_px: float, amplitude: float, orientation: str = "cols") -> np.ndarray:
    """Add ``amplitude * sin(2*pi*i/period)`` where ``i`` is the column or row index."""
    if not period_px >= 2:
        raise DataError(f"stripe period must be at least 2 px, got {period_px}")
    band = np.asarray(band, dtype=np.float64)
    if orientation == "cols":
        wave = amplitude * np.sin(2 * np.pi * np.arange(band.shape[1]) / period_px)
        return band + wave[None, :]
    if orientation == "rows":
        wave = amplitude * np.sin(2 * np.pi * np.arange(band.shape[0]) / period_px)
        return band + wave[:, None]
    raise DataError(f"orientation must be 'rows' or 'cols', got {orientation!r}")


def textured_band(height: int = 256, width: int = 256, background: float = 100.0,
                  texture_std: float = 10.0, smoothness: float = 6.0, seed: int = 0) -> np.ndarray:
    """Smooth random field around ``background``; stands in for a clean image band."""
    rng = np.random.default_rng(seed)
    field_ = gaussian_filter(rng.standard_normal((height, width)), smoothness, mode="wrap")
    field_ *= texture_std / field_.std()
    return background + field_


def class_map_raster(spec: SceneSpec, height: int, width: int, tile: int = 8,
                     seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Multi-band cube whose pixels are drawn per class over a tiled label map.

    Returns ``(cube (dims, h, w), labels (h, w))``.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    tiles = rng.integers(0, spec.n_classes, size=(math.ceil(height / tile), math.ceil(width / tile)))
    labels = np.kron(tiles, np.ones((tile, tile), dtype=np.int64))[:height, :width]
    factors = spec.cholesky_factors()
    pix = np.empty((height * width, spec.dims))
    flat = labels.ravel()
    for k in range(spec.n_classes):
        idx = np.flatnonzero(flat == k)
        pix[idx] = spec.means[k] + rng.standard_normal((idx.size, spec.dims)) @ factors[k].T
    if spec.warp:
        pix = _warp(pix)
    return pix.T.reshape(spec.dims, height, width), labels


@dataclass
class ExperimentResult:
    feature_counts: list[int]
    accuracies: dict[str, list[float]]
    train_size: int
    per_class_train: int
    seeds: dict[str, int]
    runtimes: dict[str, list[float]] = field(default_factory=dict)
    regularized: list[bool] = field(default_factory=list)
    errors: dict[str, dict[int, str]] = field(default_factory=dict)

    def to_csv(self) -> str:
        names = list(self.accuracies)
        lines = ["features," + ",".join(names) + ",mlc_regularized"]
        for i, d in enumerate(self.feature_counts):
            vals = [repr(float(self.accuracies[n][i])) for n in names]
            flag = str(int(self.regularized[i])) if self.regularized else ""
            lines.append(f"{d}," + ",".join(vals) + f",{flag}")
        return "\n".join(lines) + "\n"


def hughes_experiment(base_spec: SceneSpec, feature_counts, classifiers=("svm", "mlc"),
                      per_class_train: int | None = None, svm_config: TrainConfig | None = None,
                      kernel: KernelSpec | None = None, mlp_hidden: int = 16,
                      mlp_rate: float = 2.0, mlp_epochs: int = 1500,
                      mlp_seed: int = 1) -> ExperimentResult:
    """Train each classifier on the first ``d`` features for every ``d`` and score the test set.

    Failures inside a cell are recorded in ``errors`` and leave a NaN accuracy.
    """
    counts = [int(d) for d in feature_counts]
    if not counts or any(b <= a for a, b in zip(counts, counts[1:])):
        raise DataError("feature counts must be a non-empty increasing list")
    if counts[0] < 1 or counts[-1] > base_spec.dims:
        raise DataError(f"feature counts must lie in 1..{base_spec.dims}")
    unknown = set(classifiers) - set(CLASSIFIERS)
    if unknown:
        raise DataError(f"unknown classifiers: {', '.join(sorted(unknown))}")
    names = [c for c in CLASSIFIERS if c in set(classifiers)]
    spec = base_spec
    if per_class_train is not None and per_class_train != base_spec.train_per_class:
        spec = SceneSpec(base_spec.means, per_class_train, base_spec.test_per_class,
                         base_spec.seed, base_spec.noise_std, base_spec.covariances,
                         base_spec.warp)
    svm_config = svm_config or TrainConfig()
    kernel = kernel or KernelSpec("rbf", 2.0)
    train, test = generate_scene(spec)
    result = ExperimentResult(counts, {n: [] for n in names}, len(train), spec.train_per_class,
                              {"scene": spec.seed, "mlp": mlp_seed},
                              {n: [] for n in names}, [], {n: {} for n in names})
    for d in counts:
        tr, te = train.select_features(d), test.select_features(d)
        for name in names:
            start = time.perf_counter()
            try:
                if name == "svm":
                    model = train_one_vs_one(tr, svm_config, kernel)
                    pred = svm_predict(model, te.features)
                elif name == "mlc":
                    model = fit_mlc(tr)
                    result.regularized.append(any(model.regularized))
                    pred = classify_many(model, te.features)
                else:
                    arch = MlpArchitecture((d, mlp_hidden, tr.n_classes))
                    model = train_mlp(tr, arch, mlp_rate, mlp_epochs, mlp_seed)
                    pred = mlp_predict(model, te.features)
                acc = float(np.mean(pred == te.labels))
            except (ValueError, RuntimeError) as exc:
                result.errors[name][d] = str(exc)
                acc = math.nan
                if name == "mlc":
                    result.regularized.append(False)
            result.accuracies[name].append(acc)
            result.runtimes[name].append(time.perf_counter() - start)
    return result


def svg_chart(result: ExperimentResult, title: str = "Test accuracy vs. number of features") -> str:
    """Line chart of accuracy (percent) against feature count, one polyline per classifier."""
    W, H = 640, 420
    left, right, top, bottom = 70, 130, 40, 60
    pw, ph = W - left - right, H - top - bottom
    xs = result.feature_counts
    vals = [v for series in result.accuracies.values() for v in series if v == v]
    lo = math.floor(min(vals, default=0.0) * 10) / 10
    hi = 1.0
    if hi - lo < 0.1:
        lo = hi - 0.1
    x0, x1 = xs[0], xs[-1] if xs[-1] > xs[0] else xs[0] + 1

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(v):
        return top + (hi - v) / (hi - lo) * ph

    colors = {"svm": "#1f77b4", "mlc": "#d62728", "mlp": "#2ca02c"}
    labels = {"svm": "SVM", "mlc": "ML", "mlp": "NN"}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for x in xs:
        out.append(f'<line x1="{px(x):.1f}" y1="{top + ph}" x2="{px(x):.1f}" '
                   f'y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(x):.1f}" y="{top + ph + 18}" text-anchor="middle">{x}</text>')
    steps = int(round((hi - lo) / 0.1))
    for i in range(steps + 1):
        v = lo + i * 0.1
        out.append(f'<line x1="{left - 5}" y1="{py(v):.1f}" x2="{left}" y2="{py(v):.1f}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(v) + 4:.1f}" text-anchor="end">{v * 100:.0f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 15}" text-anchor="middle">'
               f'Number of features</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.1f})">Accuracy (%)</text>')
    for row, (name, series) in enumerate(result.accuracies.items()):
        color = colors.get(name, "black")
        pts = " ".join(f"{px(x):.1f},{py(v):.1f}" for x, v in zip(xs, series) if v == v)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, v in zip(xs, series):
            if v == v:
                out.append(f'<circle cx="{px(x):.1f}" cy="{py(v):.1f}" r="3" fill="{color}"/>')
        ly = top + 10 + 20 * row
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 45}" y="{ly + 4}">{labels.get(name, name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
