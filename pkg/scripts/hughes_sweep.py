"""Accuracy against feature count at a fixed training size.

Writes results.csv and figure.svg into --out-dir and prints one row per count.
Add --with-mlp to include the backprop network (slower).
"""
import argparse
from pathlib import Path

from landcover.svm import KernelSpec, TrainConfig
from landcover.synth import default_scene, hughes_experiment, svg_chart


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, default=Path("hughes_out"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train-per-class", type=int, default=20)
    ap.add_argument("--with-mlp", action="store_true")
    args = ap.parse_args()

    classifiers = ("svm", "mlc", "mlp") if args.with_mlp else ("svm", "mlc")
    spec = default_scene(args.train_per_class, seed=args.seed)
    result = hughes_experiment(spec, range(5, 66, 5), classifiers,
                               svm_config=TrainConfig(C=5000.0), kernel=KernelSpec("rbf", 2.0))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "results.csv").write_text(result.to_csv())
    (args.out_dir / "figure.svg").write_text(svg_chart(result))

    print("features " + " ".join(f"{c:>6}" for c in result.accuracies))
    for i, d in enumerate(result.feature_counts):
        print(f"{d:>8} " + " ".join(f"{v[i]:6.3f}" for v in result.accuracies.values()))
    for name, series in result.accuracies.items():
        peak = max(series)
        print(f"{name}: peak {peak:.3f}, final {series[-1]:.3f}, drop {peak - series[-1]:.3f}, "
              f"{sum(result.runtimes[name]):.1f} s")


if __name__ == "__main__":
    main()
