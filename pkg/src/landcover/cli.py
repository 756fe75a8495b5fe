"""Command-line entry point.

Exit codes: 0 success, 2 usage, 3 data, 4 computation. Every command that
writes files also writes ``<output>.manifest.json`` recording the exact
argument vector, input digests and output digests; ``landcover rerun`` replays
a manifest and checks the outputs come back byte-identical.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .data_model import (DataError, RasterCube, is_raster_file, load_raster, load_samples,
                         format_samples, raster_bytes)
from .destripe import (DestripeError, averaged_log_spectrum, build_filter, destripe_band,
                       stripe_energy, suppressed_energy)
from .metrics import AccuracyReport, MetricsError, confusion_matrix
from .mlc import MlcError, classify_many, dumps_mlc, fit_mlc, loads_mlc
from .mlp import MlpArchitecture, MlpError, dumps_mlp, loads_mlp, predict_many as mlp_predict, train_mlp
from .multiclass import dumps_multiclass, loads_multiclass, predict_many as svm_predict, train_one_vs_one
from .svm import KernelSpec, SvmError, TrainConfig
from .synth import (CLASSIFIERS, add_stripes, class_map_raster, default_scene, generate_scene,
                    hughes_experiment, svg_chart, textured_band)

EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 2, 3, 4

DATA_ERRORS = (DataError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError)
COMPUTE_ERRORS = (SvmError, MlcError, MlpError, DestripeError, MetricsError, RuntimeError,
                  np.linalg.LinAlgError)


class DimensionMismatch(DataError):
    pass


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    raise SystemExit(code)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DATA_ERRORS as exc:
            _fail(EXIT_DATA, str(exc))
        except COMPUTE_ERRORS as exc:
            _fail(EXIT_COMPUTE, str(exc))
    return wrapper


# ------------------------------------------------------------------ helpers

def atomic_write(path: Path, payload: bytes | str) -> None:
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _argv_from_context(ctx: click.Context) -> list[str]:
    """Rebuild a canonical argv (absolute paths, every option explicit)."""
    argv = [ctx.command.name]
    positional = []
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if isinstance(param, click.Argument):
            values = value if isinstance(value, (list, tuple)) else [value]
            positional += [_canon(param, v) for v in values if v is not None]
        elif isinstance(param, click.Option):
            if value is None or param.name == "help":
                continue
            flag = max(param.opts, key=len)
            if param.is_flag:
                if value:
                    argv.append(flag)
            else:
                argv += [flag, _canon(param, value)]
    return argv + positional


def _canon(param: click.Parameter, value) -> str:
    if isinstance(param.type, click.Path):
        return str(Path(value).resolve())
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return str(value)


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    return value


def write_manifest(ctx: click.Context, manifest_path: Path, inputs, outputs, extra=None) -> None:
    doc = {
        "tool": "landcover",
        "version": __version__,
        "command": ctx.command.name,
        "argv": _argv_from_context(ctx),
        "parameters": {k: _jsonable(v) for k, v in ctx.params.items()},
        "inputs": {str(Path(p).resolve()): sha256(p) for p in inputs},
        "outputs": {str(Path(p).resolve()): sha256(p) for p in outputs},
    }
    if extra:
        doc.update(extra)
    atomic_write(manifest_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _manifest_for(path: Path) -> Path:
    return Path(str(path) + ".manifest.json")


def _positive(name: str, allow_zero: bool = False):
    def check(ctx, param, value):
        if value is None:
            return value
        if value < 0 or (value == 0 and not allow_zero) or value != value:
            rel = ">=" if allow_zero else ">"
            raise click.BadParameter(f"{name} must satisfy {name} {rel} 0 (got {value})")
        return value
    return check


def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        items = [int(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers") from None
    if not items:
        raise click.BadParameter("list must not be empty")
    return tuple(items)


def _read_label_column(path: Path) -> np.ndarray:
    """Integer labels from the last column of a CSV with a header line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    lines = [ln for ln in lines if ln.strip()]
    if len(lines) < 2:
        raise DataError(f"{path}: no labels")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            out.append(int(line.split(",")[-1]))
        except ValueError:
            raise DataError(f"{path}:{lineno}: label must be an integer") from None
    return np.array(out, dtype=np.int64)


def load_model(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    head = text.split("\n", 1)[0].strip()
    try:
        if head == "svm-ovo":
            return "svm", loads_multiclass(text)
        if head == "mlc":
            return "mlc", loads_mlc(text)
        if head == "mlp":
            return "mlp", loads_mlp(text)
    except (ValueError, IndexError, KeyError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    raise DataError(f"{path}: unrecognised model type {head!r}")


def model_dim(kind: str, model) -> int:
    if kind == "svm":
        return model.dim
    if kind == "mlc":
        return model.dim
    return model.architecture.n_inputs


def predict_with(kind: str, model, X: np.ndarray) -> np.ndarray:
    expected = model_dim(kind, model)
    if X.shape[1] != expected:
        raise DimensionMismatch(f"model expects {expected} features, input has {X.shape[1]}")
    if kind == "svm":
        return svm_predict(model, X)
    if kind == "mlc":
        return classify_many(model, X)
    return mlp_predict(model, X)


# ------------------------------------------------------------------ commands

@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="landcover")
def main():
    """Land-cover classification: SVM, maximum likelihood and backprop network."""


@main.command()
@click.argument("samples", type=click.Path(path_type=Path))
@click.option("--classifier", type=click.Choice(CLASSIFIERS), default="svm", show_default=True)
@click.option("--out", "-o", type=click.Path(path_type=Path), default=Path("model.txt"),
              show_default=True, help="Model file to write.")
@click.option("--kernel", type=click.Choice(["rbf", "linear"]), default="rbf", show_default=True)
@click.option("--gamma", type=float, default=2.0, show_default=True, callback=_positive("gamma"),
              help="RBF kernel width.")
@click.option("--c", "C", type=float, default=5000.0, show_default=True, callback=_positive("C"),
              help="Misclassification penalty.")
@click.option("--tol", type=float, default=1e-3, show_default=True, callback=_positive("tol"),
              help="KKT tolerance of the SMO solver.")
@click.option("--max-passes", type=int, default=100_000, show_default=True,
              callback=_positive("max_passes"), help="Maximum SMO pair updates.")
@click.option("--priors", type=click.Choice(["uniform", "frequency"]), default="uniform",
              show_default=True, help="MLC class priors.")
@click.option("--hidden", type=str, default="16", show_default=True, callback=_int_list,
              help="MLP hidden layer sizes, comma separated.")
@click.option("--rate", type=float, default=0.5, show_default=True,
              callback=_positive("rate", allow_zero=True), help="MLP learning rate.")
@click.option("--epochs", type=int, default=1000, show_default=True,
              callback=_positive("epochs", allow_zero=True), help="MLP full-batch epochs.")
@click.option("--seed", type=int, default=0, show_default=True, help="MLP initialisation seed.")
@click.pass_context
@handles_errors
def train(ctx, samples, classifier, out, kernel, gamma, C, tol, max_passes, priors, hidden,
          rate, epochs, seed):
    """Train a classifier on a sample CSV and write the model file."""
    ds = load_samples(samples)
    start = time.perf_counter()
    if classifier == "svm":
        model = train_one_vs_one(ds, TrainConfig(C, tol, max_passes), KernelSpec(kernel, gamma))
        text = dumps_multiclass(model)
        summary = (f"{ds.n_classes} classes -> {len(model.pairs)} binary classifiers, "
                   f"{model.n_support} support vectors in total")
    elif classifier == "mlc":
        model = fit_mlc(ds, priors)
        text = dumps_mlc(model)
        flagged = sum(model.regularized)
        summary = f"{ds.n_classes} class Gaussians, {flagged} ridge-regularized covariance(s)"
    else:
        arch = MlpArchitecture((ds.dim, *hidden, ds.n_classes))
        model = train_mlp(ds, arch, rate, epochs, seed)
        text = dumps_mlp(model)
        summary = (f"layers {'-'.join(map(str, arch.layer_sizes))}, loss "
                   f"{model.initial_loss:.6f} -> {model.final_loss:.6f}")
    elapsed = time.perf_counter() - start
    atomic_write(out, text)
    write_manifest(ctx, _manifest_for(out), [samples], [out])
    click.echo(f"{classifier}: {summary}")
    click.echo(f"training time: {elapsed:.3f} s")
    click.echo(f"model written to {out}")


@main.command()
@click.argument("model_path", type=click.Path(path_type=Path))
@click.argument("input_path", type=click.Path(path_type=Path))
@click.option("--out", "-o", type=click.Path(path_type=Path), default=None,
              help="Output file (default: labels.csv, or <input>_labels.tcr for rasters).")
@click.pass_context
@handles_errors
def classify(ctx, model_path, input_path, out):
    """Label every row of a sample CSV or every pixel of a raster."""
    kind, model = load_model(model_path)
    if not Path(input_path).exists():
        raise DataError(f"{input_path}: no such file")
    if is_raster_file(input_path):
        cube = load_raster(input_path)
        labels = predict_with(kind, model, cube.pixels())
        out = out or input_path.with_name(input_path.stem + "_labels.tcr")
        label_cube = RasterCube(labels.reshape(1, cube.height, cube.width).astype(np.float32))
        atomic_write(out, raster_bytes(label_cube))
        click.echo(f"{cube.width}x{cube.height} pixels labelled, "
                   f"{len(np.unique(labels))} distinct classes")
    else:
        ds = load_samples(input_path)
        labels = predict_with(kind, model, ds.features)
        out = out or Path("labels.csv")
        atomic_write(out, "label\n" + "".join(f"{int(v)}\n" for v in labels))
        click.echo(f"{len(labels)} samples labelled")
    write_manifest(ctx, _manifest_for(out), [model_path, input_path], [out])
    click.echo(f"labels written to {out}")


@main.command()
@click.argument("truth", type=click.Path(path_type=Path))
@click.argument("predictions", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--names", type=str, default=None,
              help="Comma-separated display names for the prediction files.")
@click.option("--out", "-o", type=click.Path(path_type=Path), default=None,
              help="Write the text report here as well as to stdout.")
@click.option("--csv", "csv_path", type=click.Path(path_type=Path), default=None,
              help="Write the report as CSV.")
@click.pass_context
@handles_errors
def evaluate(ctx, truth, predictions, names, out, csv_path):
    """Accuracy, kappa and pairwise Z for one or more prediction files."""
    t = _read_label_column(truth)
    preds = [_read_label_column(p) for p in predictions]
    for p, arr in zip(predictions, preds):
        if arr.size != t.size:
            raise DataError(f"{p} has {arr.size} labels but {truth} has {t.size}")
    label_names = names.split(",") if names else [Path(p).stem for p in predictions]
    if len(label_names) != len(preds):
        raise click.BadParameter("one name per prediction file", param_hint="--names")
    n = int(max(t.max(), *(p.max() for p in preds))) + 1
    report = AccuracyReport(tuple(label_names), tuple(confusion_matrix(t, p, n) for p in preds))
    text = report.to_text()
    click.echo(text, nl=False)
    written = []
    if out:
        atomic_write(out, text)
        written.append(out)
    if csv_path:
        atomic_write(csv_path, report.to_csv())
        written.append(csv_path)
    if written:
        write_manifest(ctx, _manifest_for(written[0]), [truth, *predictions], written)


@main.command()
@click.argument("raster", type=click.Path(path_type=Path))
@click.option("--out", "-o", type=click.Path(path_type=Path), default=None,
              help="Output raster (default: <input>_destriped.tcr next to the input).")
@click.option("--block", type=int, default=128, show_default=True, help="Block size (power of two).")
@click.option("--overlap", type=float, default=0.5, show_default=True, help="Block overlap fraction.")
@click.option("--threshold", type=float, default=4.0, show_default=True,
              callback=_positive("threshold"), help="Peak threshold in robust sigmas.")
@click.option("--bands", type=str, default=None, callback=_int_list,
              help="Comma-separated 0-based bands to filter (default: all).")
@click.option("--period", type=float, default=None, help="Report stripe energy at this period (px).")
@click.option("--axis", type=click.Choice(["cols", "rows"]), default="cols", show_default=True,
              help="Stripe axis for --period.")
@click.pass_context
@handles_errors
def destripe(ctx, raster, out, block, overlap, threshold, bands, period, axis):
    """Remove periodic stripes from raster bands by spectral notch filtering."""
    cube = load_raster(raster)
    selected = list(bands) if bands else list(range(cube.bands))
    for b in selected:
        if not 0 <= b < cube.bands:
            raise DataError(f"band {b} outside 0..{cube.bands - 1}")
    data = cube.data.astype(np.float64)
    total = 0
    for b in selected:
        band = data[b]
        filt = build_filter(averaged_log_spectrum(band, block, overlap), band.shape, threshold)
        cleaned = destripe_band(band, filt)
        line = (f"band {b}: {filt.suppressed} bins suppressed; notched energy "
                f"{suppressed_energy(band, filt):.4g} -> {suppressed_energy(cleaned, filt):.4g}")
        if period is not None:
            line += (f"; stripe energy (period {period:g} px, {axis}) "
                     f"{stripe_energy(band, axis, period):.4g} -> "
                     f"{stripe_energy(cleaned, axis, period):.4g}")
        click.echo(line)
        data[b] = cleaned
        total += filt.suppressed
    out = out or raster.with_name(raster.stem + "_destriped" + (raster.suffix or ".tcr"))
    atomic_write(out, raster_bytes(RasterCube(data.astype(np.float32))))
    write_manifest(ctx, _manifest_for(out), [raster], [out])
    click.echo(f"{total} bins suppressed in total; written to {out}")


@main.command()
@click.option("--out-dir", type=click.Path(path_type=Path), default=Path("synth"), show_default=True)
@click.option("--classes", type=int, default=8, show_default=True)
@click.option("--dims", type=int, default=65, show_default=True)
@click.option("--train-per-class", type=int, default=20, show_default=True)
@click.option("--test-per-class", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--raster-size", type=int, default=0, show_default=True,
              help="Also write a SIZE x SIZE class-map cube (scene.tcr) and its labels.")
@click.option("--striped", is_flag=True,
              help="Also write a 256x256 textured band with period-4 stripes (striped.tcr).")
@click.pass_context
@handles_errors
def synth(ctx, out_dir, classes, dims, train_per_class, test_per_class, seed, raster_size, striped):
    """Generate a synthetic labelled scene (train/test CSVs, optional rasters)."""
    if classes < 2 or dims < 1:
        raise click.BadParameter("need --classes >= 2 and --dims >= 1")
    spec = default_scene(train_per_class, test_per_class, seed, classes, dims)
    train_ds, test_ds = generate_scene(spec)
    outputs = [out_dir / "train.csv", out_dir / "test.csv"]
    atomic_write(outputs[0], format_samples(train_ds))
    atomic_write(outputs[1], format_samples(test_ds))
    if raster_size:
        cube, labels = class_map_raster(spec, raster_size, raster_size)
        atomic_write(out_dir / "scene.tcr", raster_bytes(RasterCube(cube)))
        atomic_write(out_dir / "scene_labels.tcr",
                     raster_bytes(RasterCube(labels[np.newaxis].astype(np.float32))))
        outputs += [out_dir / "scene.tcr", out_dir / "scene_labels.tcr"]
    if striped:
        clean = textured_band(seed=seed)
        atomic_write(out_dir / "clean.tcr", raster_bytes(RasterCube(clean)))
        atomic_write(out_dir / "striped.tcr",
                     raster_bytes(RasterCube(add_stripes(clean, 4, 50.0, "cols"))))
        outputs += [out_dir / "clean.tcr", out_dir / "striped.tcr"]
    write_manifest(ctx, out_dir / "manifest.json", [], outputs)
    click.echo(f"{len(train_ds)} training and {len(test_ds)} test samples "
               f"({classes} classes, {dims} features) written to {out_dir}")


@main.command()
@click.option("--out-dir", type=click.Path(path_type=Path), default=Path("experiment"),
              show_default=True)
@click.option("--counts", type=str, default=",".join(str(d) for d in range(5, 66, 5)),
              show_default=True, callback=_int_list, help="Feature counts to sweep.")
@click.option("--classifiers", type=str, default="svm,mlc", show_default=True,
              help="Comma-separated subset of svm,mlc,mlp.")
@click.option("--train-per-class", type=int, default=20, show_default=True)
@click.option("--test-per-class", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Scene seed.")
@click.option("--gamma", type=float, default=2.0, show_default=True, callback=_positive("gamma"))
@click.option("--c", "C", type=float, default=5000.0, show_default=True, callback=_positive("C"))
@click.option("--mlp-seed", type=int, default=1, show_default=True)
@click.pass_context
@handles_errors
def experiment(ctx, out_dir, counts, classifiers, train_per_class, test_per_class, seed, gamma,
               C, mlp_seed):
    """Accuracy against feature count at a fixed training size; writes CSV and SVG."""
    chosen = tuple(c.strip() for c in classifiers.split(",") if c.strip())
    bad = set(chosen) - set(CLASSIFIERS)
    if bad or not chosen:
        raise click.BadParameter(f"unknown classifier(s): {', '.join(sorted(bad))}",
                                 param_hint="--classifiers")
    spec = default_scene(train_per_class, test_per_class, seed, dims=max(65, max(counts)))
    result = hughes_experiment(spec, counts, chosen, svm_config=TrainConfig(C=C),
                               kernel=KernelSpec("rbf", gamma), mlp_seed=mlp_seed)
    csv_path, svg_path = out_dir / "results.csv", out_dir / "figure.svg"
    atomic_write(csv_path, result.to_csv())
    atomic_write(svg_path, svg_chart(result))
    write_manifest(ctx, out_dir / "manifest.json", [], [csv_path, svg_path],
                   {"seeds": result.seeds})
    for name, series in result.accuracies.items():
        click.echo(f"{name}: " + " ".join(f"{d}:{v:.3f}" for d, v in zip(counts, series)))
        click.echo(f"{name} time: {sum(result.runtimes[name]):.2f} s")
        for d, msg in result.errors[name].items():
            click.echo(f"{name} failed at {d} features: {msg}", err=True)
    click.echo(f"{len(counts)} experiments written to {csv_path} and {svg_path}")


@main.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@handles_errors
def rerun(manifest):
    """Replay a manifest and verify its outputs are byte-identical."""
    try:
        doc = json.loads(Path(manifest).read_text(encoding="utf-8"))
        argv, expected = doc["argv"], doc["outputs"]
    except FileNotFoundError:
        raise DataError(f"{manifest}: no such file") from None
    except (ValueError, KeyError):
        raise DataError(f"{manifest}: not a landcover manifest") from None
    for path, digest in doc.get("inputs", {}).items():
        if not Path(path).exists():
            raise DataError(f"input {path} is missing")
        if sha256(Path(path)) != digest:
            raise DataError(f"input {path} changed since the manifest was written")
    try:
        main.main(args=list(argv), prog_name="landcover", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        raise SystemExit(EXIT_USAGE)
    mismatched = [p for p, d in expected.items() if sha256(Path(p)) != d]
    if mismatched:
        _fail(EXIT_COMPUTE, "outputs differ from the manifest: " + ", ".join(mismatched))
    click.echo(f"{len(expected)} output(s) reproduced byte-identically")


if __name__ == "__main__":
    sys.exit(main())
