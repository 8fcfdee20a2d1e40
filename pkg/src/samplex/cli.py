"""Command-line entry point: ``samplex <command> ...``.

Exit codes: 0 success, 1 input error, 2 numerical failure, 3 degenerate delta fit.
Every run that writes files also writes one JSON manifest next to them,
recording the command, a digest of all inputs and parameters, the seed,
the tool version and the output files with their hashes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from samplex import __version__
from samplex.distributions import fit_diag_gaussian
from samplex.error_model import METRICS, ErrorModelConfig
from samplex.errors import FlatObjectiveError, InputError, NumericalError
from samplex.estimator import DEFAULT_MC_SAMPLES, EstimatorSpec, estimate_curve
from samplex.io import (
    dumps_json,
    format_features_csv,
    read_features_csv,
    read_json,
    sha256_file,
    write_json,
)
from samplex.pipeline import (
    DEFAULT_EPSILON,
    AccuracyTable,
    fit_delta,
    fit_pca,
    fit_region,
    knn_accuracy,
    predict_curve,
    project,
    select_effective_dim,
)
from samplex.simulator import LearningCurve, SimulationSpec, resolve_threads, run_simulation

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 1, 2, 3


class Manifest:
    """Collects inputs, parameters and outputs of one command run."""

    def __init__(self, command: str, seed: Optional[int] = None):
        self.command = command
        self.seed = seed
        self.inputs: dict[str, dict] = {}
        self.parameters: dict = {}
        self.outputs: list[Path] = []

    def add_input(self, role: str, path) -> None:
        self.inputs[role] = {"path": str(path), "sha256": sha256_file(path)}

    def write_text(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.outputs.append(path)

    def config_digest(self) -> str:
        payload = {
            "command": self.command,
            "parameters": self.parameters,
            "inputs": {role: meta["sha256"] for role, meta in sorted(self.inputs.items())},
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def save(self, path: Path) -> None:
        base = path.parent
        doc = {
            "command": self.command,
            "config_digest": self.config_digest(),
            "seed": self.seed,
            "tool_version": __version__,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": [
                {"path": _relative(p, base), "sha256": sha256_file(p)} for p in self.outputs
            ],
        }
        write_json(doc, path)


def _relative(path: Path, base: Path) -> str:
    try:
        return str(path.resolve().relative_to(base.resolve()))
    except ValueError:
        return str(path)


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _parse_grid(text: str) -> list[int]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--n-grid must be comma-separated integers, got {text!r}") from None
    if not values:
        raise InputError("n_grid must not be empty")
    if any(v != int(v) for v in values):
        raise InputError("n_grid entries must be integers")
    return [int(v) for v in values]


def _check_finite(curve_error: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(curve_error)):
        raise NumericalError(f"{what} produced non-finite values")


# -- commands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    doc = read_json(args.config)
    if args.seed is not None and isinstance(doc, dict):
        doc = {**doc, "base_seed": args.seed}
    spec = SimulationSpec.from_dict(doc)
    manifest = Manifest("simulate", spec.base_seed)
    manifest.add_input("config", args.config)
    manifest.parameters = spec.to_dict()
    curve = run_simulation(spec, threads=resolve_threads(args.threads))
    _check_finite(curve.error, "simulation")
    out = Path(args.out)
    manifest.write_text(out, curve.to_csv())
    manifest.save(_manifest_path(out))
    print(f"wrote {len(curve)} rows to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    doc = read_json(args.config)
    if not isinstance(doc, dict):
        raise InputError("configuration must be a JSON object")
    doc = dict(doc)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.mc_samples is not None:
        doc["mc_samples"] = args.mc_samples
    if args.n_grid is not None:
        grid = _parse_grid(args.n_grid)
    elif "n_grid" in doc:
        grid = doc["n_grid"]
        if not isinstance(grid, list) or not grid:
            raise InputError("n_grid must be a non-empty list of integers")
    else:
        raise InputError("missing required field 'n_grid' (config or --n-grid)")
    spec = EstimatorSpec.from_dict(doc)
    manifest = Manifest("estimate", spec.seed)
    manifest.add_input("config", args.config)
    manifest.parameters = {**spec.to_dict(), "n_grid": [int(n) for n in grid]}
    curve = estimate_curve(spec, grid)
    _check_finite(curve.error, "estimator")
    out = Path(args.out)
    manifest.write_text(out, curve.to_csv())
    manifest.save(_manifest_path(out))
    for n, err, se in curve.points():
        print(f"N={n}\terror={err:.6g}\tmc_se={se:.3g}")
    return EXIT_OK


def _comparison_csv(empirical: LearningCurve, predicted: LearningCurve, fit_mask_n: set) -> str:
    emp = {int(n): (float(e), float(s)) for n, e, s in empirical.points()}
    lines = ["n,empirical_error,empirical_spread,predicted_error,predicted_se,in_fit_region"]
    for n, err, se in predicted.points():
        e, s = emp.get(n, (None, None))
        lines.append(",".join([
            str(n),
            "" if e is None else repr(e),
            "" if s is None else repr(s),
            repr(err),
            repr(se),
            "1" if n in fit_mask_n else "0",
        ]))
    return "\n".join(lines) + "\n"


def cmd_pipeline(args) -> int:
    if args.dim < 1:
        raise InputError("--dim must be >= 1")
    manifest = Manifest("pipeline", args.seed)
    for role, path in (("train_features", args.train_features),
                       ("test_features", args.test_features),
                       ("empirical_curve", args.empirical)):
        manifest.add_input(role, path)
    train = read_features_csv(args.train_features)
    test = read_features_csv(args.test_features)
    if train.dim != test.dim:
        raise InputError(f"feature widths differ: train has {train.dim}, test has {test.dim}")
    empirical = LearningCurve.read_csv(args.empirical)
    extra = _parse_grid(args.predict_grid) if args.predict_grid else []

    manifest.parameters = {
        "dim": args.dim,
        "small_fraction": args.small_fraction,
        "mc_samples": args.mc_samples,
        "metric": args.metric,
        "predict_grid": extra,
    }
    if len(train) < 2:
        raise InputError("train feature file needs at least 2 rows to fit a Gaussian")
    proj = fit_pca(train, args.dim)
    train_dist = fit_diag_gaussian(project(proj, train))
    test_dist = fit_diag_gaussian(project(proj, test))
    spec = EstimatorSpec(
        train_dist,
        test_dist,
        ErrorModelConfig(delta=1.0, dim=args.dim, metric=args.metric),
        mc_samples=args.mc_samples,
        seed=args.seed if args.seed is not None else 0,
    )
    fit = fit_delta(empirical, spec, small_data_fraction=args.small_fraction)
    grid = sorted(set(int(n) for n in empirical.n) | set(extra))
    predicted = predict_curve(fit, spec, grid)
    _check_finite(predicted.error, "prediction")
    fit_n = set(int(n) for n in empirical.n[fit_region(empirical, args.small_fraction)])

    out = Path(args.out)
    manifest.write_text(out / "pca.json", dumps_json(proj.to_dict()))
    manifest.write_text(out / "distributions.json",
                        dumps_json({"train": train_dist.to_dict(), "test": test_dist.to_dict()}))
    manifest.write_text(out / "delta_fit.json", dumps_json(fit.to_dict()))
    manifest.write_text(out / "predicted.csv", predicted.to_csv())
    manifest.write_text(out / "comparison.csv", _comparison_csv(empirical, predicted, fit_n))
    manifest.save(out / "manifest.json")
    print(f"delta = {fit.delta:.6g} (objective {fit.objective:.3g}, {len(fit.fit_points)} fit points)")
    return EXIT_OK


def _load_baseline(args) -> Optional[float]:
    if args.baseline is not None:
        return args.baseline
    sidecar = Path(args.baseline_json) if args.baseline_json else Path(args.table).with_suffix(".json")
    if args.baseline_json or sidecar.exists():
        doc = read_json(sidecar)
        if not isinstance(doc, dict) or "baseline" not in doc:
            raise InputError(f"{sidecar}: expected a JSON object with a 'baseline' key")
        return float(doc["baseline"])
    return None


def cmd_effdim(args) -> int:
    table = AccuracyTable.from_csv(Path(args.table).read_text(encoding="utf-8"),
                                   baseline=_load_baseline(args))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = select_effective_dim(table, args.epsilon)
    print("width,accuracy,gain_to_next")
    gains = dict(result.gains)
    for w, a in zip(table.widths, table.accuracies):
        g = gains.get(w)
        print(f"{w},{a:g},{'' if g is None else f'{g:+.4f}'}")
    if table.baseline is not None:
        print(f"baseline accuracy: {table.baseline:g}")
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"effective dimension: {result.dim}")
    if args.out:
        manifest = Manifest("effdim", args.seed)
        manifest.add_input("table", args.table)
        manifest.parameters = {"epsilon": args.epsilon, "baseline": table.baseline}
        out = Path(args.out)
        manifest.write_text(out, dumps_json({
            "dim": result.dim,
            "saturated": result.saturated,
            "epsilon": result.epsilon,
            "gains": [[w, g] for w, g in result.gains],
        }))
        manifest.save(_manifest_path(out))
    return EXIT_OK


def cmd_knn_eval(args) -> int:
    train = read_features_csv(args.train)
    test = read_features_csv(args.test)
    if train.dim != test.dim:
        raise InputError(f"feature widths differ: train has {train.dim}, test has {test.dim}")
    if args.dim is not None:
        proj = fit_pca(train, args.dim)
        train, test = project(proj, train), project(proj, test)
    acc = knn_accuracy(train, test, workers=resolve_threads(args.threads))
    print(f"1-NN accuracy (d={train.dim}): {acc:.6g}")
    if args.out:
        manifest = Manifest("knn-eval", args.seed)
        manifest.add_input("train", args.train)
        manifest.add_input("test", args.test)
        manifest.parameters = {"dim": args.dim}
        out = Path(args.out)
        manifest.write_text(out, dumps_json({
            "accuracy": acc, "dim": train.dim, "n_train": len(train), "n_test": len(test),
        }))
        manifest.save(_manifest_path(out))
    return EXIT_OK


def cmd_fit_dist(args) -> int:
    features = read_features_csv(args.features)
    dist = fit_diag_gaussian(features)
    manifest = Manifest("fit-dist", args.seed)
    manifest.add_input("features", args.features)
    out = Path(args.out)
    manifest.write_text(out, dumps_json(dist.to_dict()))
    manifest.save(_manifest_path(out))
    print(f"fitted {dist.dim}-dimensional diagonal Gaussian from {len(features)} rows")
    return EXIT_OK


def cmd_pca(args) -> int:
    features = read_features_csv(args.features)
    proj = fit_pca(features, args.dim)
    manifest = Manifest("pca", args.seed)
    manifest.add_input("features", args.features)
    manifest.parameters = {"dim": args.dim}
    out = Path(args.out)
    manifest.write_text(out, dumps_json(proj.to_dict()))
    if args.project:
        manifest.add_input("project", args.project)
        target = read_features_csv(args.project)
        dest = Path(args.projected_out) if args.projected_out else out.with_name(out.stem + "_projected.csv")
        manifest.write_text(dest, format_features_csv(project(proj, target)))
    manifest.save(_manifest_path(out))
    print("explained variance: " + ", ".join(f"{v:.6g}" for v in proj.explained_variance))
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="random seed (overrides config)")
    shared.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $SAMPLEX_THREADS or all cores)")

    parser = argparse.ArgumentParser(prog="samplex", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[shared], help="Monte Carlo learning curve")
    p.add_argument("config", help="simulation JSON config")
    p.add_argument("--out", required=True, help="output CSV (n,error,spread)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[shared], help="theoretical learning curve")
    p.add_argument("config", help="estimator JSON config")
    p.add_argument("--n-grid", help="comma-separated training sizes (overrides config)")
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--out", required=True, help="output CSV (n,error,spread)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pipeline", parents=[shared], help="fit delta on real features and extrapolate")
    p.add_argument("--train-features", required=True)
    p.add_argument("--test-features", required=True)
    p.add_argument("--empirical", required=True, help="empirical curve CSV (n,error[,spread])")
    p.add_argument("--dim", type=int, required=True, help="effective dimension")
    p.add_argument("--small-fraction", type=float, default=0.5)
    p.add_argument("--mc-samples", type=int, default=DEFAULT_MC_SAMPLES)
    p.add_argument("--metric", choices=METRICS, default="l2")
    p.add_argument("--predict-grid", help="extra training sizes to predict, comma-separated")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("effdim", parents=[shared], help="effective dimension from an accuracy table")
    p.add_argument("table", help="CSV with header width,accuracy")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--baseline", type=float, default=None)
    p.add_argument("--baseline-json", default=None,
                   help="JSON with a 'baseline' key (default: <table>.json if present)")
    p.add_argument("--out", default=None, help="optional JSON report")
    p.set_defaults(func=cmd_effdim)

    p = sub.add_parser("knn-eval", parents=[shared], help="1-NN accuracy on labelled features")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--dim", type=int, default=None, help="PCA-project to this width first")
    p.add_argument("--out", default=None, help="optional JSON report")
    p.set_defaults(func=cmd_knn_eval)

    p = sub.add_parser("fit-dist", parents=[shared], help="diagonal Gaussian MLE of a feature file")
    p.add_argument("features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_dist)

    p = sub.add_parser("pca", parents=[shared], help="fit a PCA projection")
    p.add_argument("features")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--project", default=None, help="feature file to project with the fitted basis")
    p.add_argument("--projected-out", default=None)
    p.add_argument("--out", required=True, help="output PCA JSON")
    p.set_defaults(func=cmd_pca)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FlatObjectiveError as exc:
        print(f"samplex: degenerate fit: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (NumericalError, FloatingPointError) as exc:
        print(f"samplex: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as exc:
        print(f"samplex: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
