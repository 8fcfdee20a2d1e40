"""Real-data workflow: effective dimension, PCA, delta fitting and extrapolation.

Inputs are precomputed artifacts: bottleneck accuracy tables, exported
feature vectors (from a network trained on part of the data) and an
empirical learning curve measured on the small-data regime.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from samplex.errors import DimensionMismatchError, FlatObjectiveError, InputError
from samplex.estimator import CommonDraws, CurveTable, EstimatorSpec, estimate_curve
from samplex.geometry import NnIndex, PointSet
from samplex.simulator import LearningCurve

DEFAULT_EPSILON = 0.02
DELTA_RANGE = (1e-4, 1e2)
GRID_PER_DECADE = 25
DELTA_RTOL = 1e-3


class SaturationWarning(UserWarning):
    """Accuracy never stops growing by at least epsilon over the table."""


class DeltaRangeWarning(UserWarning):
    """The best delta sits on the edge of the search range."""


# -- effective dimensionality -------------------------------------------------

@dataclass(frozen=True)
class AccuracyTable:
    widths: tuple
    accuracies: tuple
    baseline: Optional[float] = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        accs = tuple(float(a) for a in self.accuracies)
        if len(widths) != len(accs):
            raise InputError("widths and accuracies must have equal length")
        if any(w < 1 for w in widths) or any(b <= a for a, b in zip(widths, widths[1:])):
            raise InputError("bottleneck widths must be positive and strictly increasing")
        if any(not 0.0 <= a <= 1.0 for a in accs):
            raise InputError("accuracies must lie in [0, 1]")
        if self.baseline is not None and not 0.0 <= self.baseline <= 1.0:
            raise InputError("baseline accuracy must lie in [0, 1]")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "accuracies", accs)

    @classmethod
    def from_csv(cls, text: str, baseline: Optional[float] = None) -> "AccuracyTable":
        reader = csv.DictReader(io.StringIO(text))
        if not reader.fieldnames or {"width", "accuracy"} - set(reader.fieldnames):
            raise InputError("accuracy table CSV needs a 'width,accuracy' header")
        widths, accs = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                w = float(row["width"])
                if w != int(w):
                    raise ValueError(f"width {row['width']!r} is not an integer")
                widths.append(int(w))
                accs.append(float(row["accuracy"]))
            except (TypeError, ValueError) as exc:
                raise InputError(f"accuracy table line {lineno}: {exc}") from None
        return cls(widths, accs, baseline)


@dataclass(frozen=True)
class EffectiveDim:
    dim: int
    saturated: bool
    epsilon: float
    gains: tuple  # (width, accuracy gain to the next width)


def select_effective_dim(table: AccuracyTable, epsilon: float = DEFAULT_EPSILON) -> EffectiveDim:
    """Smallest width after which every consecutive accuracy gain stays below ``epsilon``.

    If no width qualifies, the largest width is returned with ``saturated=False``
    and a :class:`SaturationWarning`.
    """
    if len(table.widths) < 2:
        raise InputError("need at least 2 table rows to detect saturation")
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon!r}")
    acc = table.accuracies
    gains = tuple((table.widths[i], acc[i + 1] - acc[i]) for i in range(len(acc) - 1))
    # scan from the right: keep extending the saturated tail while gains stay small
    start = None
    for i in range(len(gains) - 1, -1, -1):
        if gains[i][1] >= epsilon:
            break
        start = i
    if start is None:
        warnings.warn(
            f"accuracy gains never fall below epsilon={epsilon}; saturation not reached",
            SaturationWarning,
            stacklevel=2,
        )
        return EffectiveDim(table.widths[-1], False, epsilon, gains)
    return EffectiveDim(table.widths[start], True, epsilon, gains)


# -- PCA ------------------------------------------------------------------------

@dataclass(frozen=True)
class PcaProjection:
    mean: np.ndarray
    basis: np.ndarray  # (d, D), orthonormal rows
    explained_variance: np.ndarray
    total_variance: float = field(default=float("nan"))

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=np.float64))
        ev = np.asarray(self.explained_variance, dtype=np.float64).reshape(-1)
        if basis.shape[1] != mean.size or ev.size != basis.shape[0]:
            raise InputError("PCA mean, basis and explained variance have inconsistent shapes")
        for arr in (mean, basis, ev):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "explained_variance", ev)
        object.__setattr__(self, "total_variance", float(self.total_variance))

    @property
    def input_dim(self) -> int:
        return self.mean.size

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def discarded_variance(self) -> float:
        return self.total_variance - float(np.sum(self.explained_variance))

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "basis": self.basis.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "total_variance": self.total_variance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PcaProjection":
        try:
            return cls(doc["mean"], doc["basis"], doc["explained_variance"],
                       doc.get("total_variance", float("nan")))
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad PCA projection document: {exc}") from None


def _as_matrix(features) -> np.ndarray:
    x = features.points if isinstance(features, PointSet) else np.asarray(features, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def fit_pca(features, target_dim: int) -> PcaProjection:
    """Top principal components of the mean-centred data (covariance with 1/n).

    Each basis row is signed so that its largest-magnitude coordinate is positive.
    """
    x = _as_matrix(features)
    n, width = x.shape
    if int(target_dim) != target_dim or not 1 <= target_dim <= width:
        raise InputError(f"target_dim must be in [1, {width}], got {target_dim!r}")
    if n < 2:
        raise InputError("PCA needs at least 2 feature vectors")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    tol = max(evals[0], np.finfo(float).tiny) * width * np.finfo(float).eps * 10
    rank = int(np.count_nonzero(evals > tol))
    if target_dim > rank:
        raise InputError(f"target_dim {target_dim} exceeds the data rank {rank}")
    basis = evecs[:, :target_dim].T.copy()
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaProjection(mean, basis, evals[:target_dim], float(np.trace(cov)))


def project(proj: PcaProjection, features) -> PointSet:
    """Centre and project onto the PCA basis; labels are carried through."""
    x = _as_matrix(features)
    if x.shape[1] != proj.input_dim:
        raise DimensionMismatchError(
            f"features have width {x.shape[1]}, projection expects {proj.input_dim}"
        )
    labels = features.labels if isinstance(features, PointSet) else None
    return PointSet((x - proj.mean) @ proj.basis.T, labels)


def back_project(proj: PcaProjection, projected) -> np.ndarray:
    """Map projected coordinates back into the raw feature space."""
    y = _as_matrix(projected)
    return proj.mean + y @ proj.basis


# -- delta fitting --------------------------------------------------------------

@dataclass(frozen=True)
class DeltaFit:
    delta: float
    objective: float
    fit_points: tuple  # ((N, empirical error), ...)
    small_data_fraction: float
    at_bound: bool = False
    metric: str = "l2"
    loss: str = "sum_squared_error"

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "objective": self.objective,
            "fit_points": [[int(n), float(e)] for n, e in self.fit_points],
            "small_data_fraction": self.small_data_fraction,
            "at_bound": self.at_bound,
            "metric": self.metric,
            "loss": self.loss,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DeltaFit":
        try:
            delta = float(doc["delta"])
            if not delta > 0:
                raise ValueError("delta must be positive")
            return cls(
                delta=delta,
                objective=float(doc["objective"]),
                fit_points=tuple((int(n), float(e)) for n, e in doc["fit_points"]),
                small_data_fraction=float(doc["small_data_fraction"]),
                at_bound=bool(doc.get("at_bound", False)),
                metric=doc.get("metric", "l2"),
                loss=doc.get("loss", "sum_squared_error"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad delta-fit document: {exc}") from None


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_search(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """Minimiser of a unimodal ``f`` on [a, b], located to within ``tol``."""
    a, b = min(a, b), max(a, b)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def fit_region(empirical: LearningCurve, small_data_fraction: float) -> np.ndarray:
    if not 0.0 < small_data_fraction <= 1.0:
        raise InputError(f"small_data_fraction must be in (0, 1], got {small_data_fraction!r}")
    if len(empirical) == 0:
        raise InputError("empirical curve is empty")
    return empirical.n <= small_data_fraction * empirical.n.max()


def fit_delta(
    empirical: LearningCurve,
    spec: EstimatorSpec,
    small_data_fraction: float = 0.5,
    delta_range: tuple = DELTA_RANGE,
    per_decade: int = GRID_PER_DECADE,
    rtol: float = DELTA_RTOL,
) -> DeltaFit:
    """Least-squares delta matching the theoretical curve to the small-N empirical points.

    A log-spaced scan over ``delta_range`` picks the best grid value, then a
    golden-section search in log(delta) refines it between its grid neighbours.
    ``spec.model.delta`` is ignored.
    """
    mask = fit_region(empirical, small_data_fraction)
    if np.count_nonzero(mask) < 2:
        raise InputError(
            f"fit region (N <= {small_data_fraction} * N_max) holds fewer than 2 curve points"
        )
    fit_n = empirical.n[mask]
    target = empirical.error[mask]
    table = CurveTable(CommonDraws(spec), fit_n)

    def objective(delta: float) -> float:
        return float(np.sum((table.fast_errors(delta) - target) ** 2))

    lo, hi = (float(v) for v in delta_range)
    if not 0 < lo < hi:
        raise InputError(f"delta range must satisfy 0 < low < high, got {delta_range}")
    n_grid = int(round(math.log10(hi / lo) * per_decade)) + 1
    log_grid = np.linspace(math.log(lo), math.log(hi), n_grid)
    values = np.array([objective(math.exp(t)) for t in log_grid])
    if np.ptp(values) <= 1e-12 * max(float(values.max()), np.finfo(float).tiny):
        raise FlatObjectiveError(
            f"delta-fit objective is flat over [{lo:g}, {hi:g}]: the theoretical curve "
            "does not respond to delta (all failure probabilities saturated?)"
        )
    best = int(np.argmin(values))
    left = log_grid[max(best - 1, 0)]
    right = log_grid[min(best + 1, n_grid - 1)]
    refined = golden_section_search(lambda t: objective(math.exp(t)), left, right, math.log1p(rtol))
    refined_value = objective(math.exp(refined))
    if refined_value <= values[best]:
        log_delta, value = refined, refined_value
    else:
        log_delta, value = float(log_grid[best]), float(values[best])

    at_bound = best in (0, n_grid - 1)
    if at_bound:
        warnings.warn(
            f"best delta lies at the edge of the search range [{lo:g}, {hi:g}]",
            DeltaRangeWarning,
            stacklevel=2,
        )
    return DeltaFit(
        delta=math.exp(log_delta),
        objective=value,
        fit_points=tuple((int(n), float(e)) for n, e in zip(fit_n, target)),
        small_data_fraction=float(small_data_fraction),
        at_bound=at_bound,
        metric=spec.model.metric,
    )


def predict_curve(fit: DeltaFit, spec: EstimatorSpec, n_grid: Sequence[int]) -> LearningCurve:
    """Theoretical curve at the fitted delta, over any grid (including large N)."""
    return estimate_curve(spec.with_delta(fit.delta), n_grid)


# -- nearest-neighbour validation -------------------------------------------------

def knn_accuracy(train: PointSet, test: PointSet, workers: int = 1) -> float:
    """1-NN classification accuracy under L2 (ties go to the lowest training index)."""
    if not (train.has_labels and test.has_labels):
        raise InputError("knn_accuracy needs labelled train and test sets")
    if train.dim != test.dim:
        raise DimensionMismatchError(f"train has dimension {train.dim}, test has {test.dim}")
    if len(test) == 0:
        raise InputError("test set is empty")
    _, idx = NnIndex(train, workers=workers).query(test.points)
    return float(np.count_nonzero(train.labels[idx] == test.labels)) / len(test)
