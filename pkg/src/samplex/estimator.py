"""Theoretical learning curves by Monte Carlo integration over the test density.

The expected error at training size N is

    E_test[phi] = integral of min(1, psi(x) / delta) * f_test(x) dx,

where psi(x) is the expected nearest-neighbour distance inside the local cell
around x (see :mod:`samplex.error_model`). The integral is estimated from
``mc_samples`` draws of x ~ f_test. The same draws are reused for every N and
every delta (common random numbers), so an estimated curve is exactly
monotone in N and the delta-fit objective is a deterministic, continuous
function of delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from samplex.distributions import Distribution, UniformBox, dist_from_dict
from samplex.error_model import ErrorModelConfig, cell_side, expected_nn_distance, metric_value, phi
from samplex.errors import DimensionMismatchError, InputError, NumericalError
from samplex.simulator import LearningCurve, _check_grid, _int_field, _require

DEFAULT_MC_SAMPLES = 100_000


@dataclass(frozen=True)
class EstimatorSpec:
    train_dist: Distribution
    test_dist: Distribution
    model: ErrorModelConfig
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if int(self.mc_samples) != self.mc_samples or self.mc_samples < 1:
            raise InputError(f"mc_samples must be a positive integer, got {self.mc_samples!r}")
        dims = (self.train_dist.dim, self.test_dist.dim, self.model.dim)
        if len(set(dims)) != 1:
            raise DimensionMismatchError(
                f"train_dist, test_dist and model must share one dimension, got {dims}"
            )

    @property
    def dim(self) -> int:
        return self.model.dim

    def with_delta(self, delta: float) -> "EstimatorSpec":
        return EstimatorSpec(self.train_dist, self.test_dist, self.model.with_delta(delta),
                             self.mc_samples, self.seed)

    @classmethod
    def from_dict(cls, doc: dict) -> "EstimatorSpec":
        doc = _require(doc, ("train_dist", "test_dist", "model"))
        train = dist_from_dict(doc["train_dist"])
        return cls(
            train_dist=train,
            test_dist=dist_from_dict(doc["test_dist"]),
            model=ErrorModelConfig.from_dict(doc["model"], dim=train.dim),
            mc_samples=_int_field(doc.get("mc_samples", DEFAULT_MC_SAMPLES), "mc_samples"),
            seed=_int_field(doc.get("seed", 0), "seed"),
        )

    def to_dict(self) -> dict:
        return {
            "train_dist": self.train_dist.to_dict(),
            "test_dist": self.test_dist.to_dict(),
            "model": self.model.to_dict(),
            "mc_samples": self.mc_samples,
            "seed": self.seed,
        }


class CommonDraws:
    """Test-density draws and the training density at each, shared across N and delta."""

    def __init__(self, spec: EstimatorSpec):
        self.spec = spec
        draws = spec.test_dist.sample(spec.mc_samples, spec.seed)
        self.train_density = np.asarray(spec.train_dist.pdf(draws.points), dtype=np.float64)

    def expected_distances(self, n_train: int) -> np.ndarray:
        """Expected nearest-neighbour distance at every draw (inf where f_train = 0)."""
        side = cell_side(self.spec.model, self.train_density, n_train)
        return np.asarray(expected_nn_distance(self.spec.model, side))

    def error(self, n_train: int, delta: Optional[float] = None) -> tuple[float, float]:
        return _mean_and_se(self.failure_probabilities(n_train, delta))

    def failure_probabilities(self, n_train: int, delta: Optional[float] = None) -> np.ndarray:
        model = self.spec.model if delta is None else self.spec.model.with_delta(delta)
        return np.asarray(phi(model, self.expected_distances(n_train)))


class CurveTable:
    """Expected distances for a fixed N grid; evaluates the curve for any delta.

    :meth:`errors` applies phi to every draw. :meth:`fast_errors` gives the
    same means (up to rounding) in O(log S) per grid point: with the metric
    values t sorted, mean(min(1, t / delta)) = (sum_{t < delta} t / delta +
    #{t >= delta}) / S, read off prefix sums.
    """

    def __init__(self, draws: CommonDraws, n_grid: Sequence[int]):
        self.draws = draws
        self.n_grid = _check_grid(n_grid)
        self._dist = np.stack([draws.expected_distances(int(n)) for n in self.n_grid])
        self._sorted: Optional[np.ndarray] = None
        self._prefix: Optional[np.ndarray] = None

    def errors(self, delta: float) -> tuple[np.ndarray, np.ndarray]:
        model = self.draws.spec.model.with_delta(delta)
        probs = np.asarray(phi(model, self._dist))
        stats = [_mean_and_se(row) for row in probs]
        return np.array([m for m, _ in stats]), np.array([se for _, se in stats])

    def fast_errors(self, delta: float) -> np.ndarray:
        if self._sorted is None:
            t = np.sort(metric_value(self.draws.spec.model, self._dist), axis=1)
            finite = np.where(np.isfinite(t), t, 0.0)
            zeros = np.zeros((t.shape[0], 1))
            self._sorted = t
            self._prefix = np.concatenate([zeros, np.cumsum(finite, axis=1)], axis=1)
        size = self._sorted.shape[1]
        out = np.empty(self._sorted.shape[0])
        for i, row in enumerate(self._sorted):
            k = int(np.searchsorted(row, delta, side="left"))
            out[i] = (self._prefix[i, k] / delta + (size - k)) / size
        return out

    def curve(self, delta: float) -> LearningCurve:
        means, se = self.errors(delta)
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(se))):
            raise NumericalError("theoretical curve contains non-finite values")
        return LearningCurve(self.n_grid, means, se, kind="theoretical")


def _fmean(values: np.ndarray) -> float:
    # correctly rounded sum: independent of summation order and chunking
    return math.fsum(values.tolist()) / values.size


def _mean_and_se(values: np.ndarray) -> tuple[float, float]:
    mean = _fmean(values)
    if values.size < 2:
        return mean, 0.0
    dev = values - mean
    var = math.fsum((dev * dev).tolist()) / (values.size - 1)
    return mean, math.sqrt(var / values.size)


def estimate_error(spec: EstimatorSpec, n_train: int) -> tuple[float, float]:
    """Monte Carlo estimate of the expected test error at training size ``n_train``.

    Returns ``(error, standard_error)``.
    """
    if int(n_train) != n_train or n_train < 1:
        raise InputError(f"n_train must be a positive integer, got {n_train!r}")
    return CommonDraws(spec).error(int(n_train))


def estimate_curve(spec: EstimatorSpec, n_grid: Sequence[int]) -> LearningCurve:
    """Theoretical curve over ``n_grid``; spread holds the MC standard error."""
    return CurveTable(CommonDraws(spec), n_grid).curve(spec.model.delta)


def saturated_fraction(spec: EstimatorSpec, n_train: int) -> float:
    """Share of MC draws whose failure probability is clamped at 1."""
    probs = CommonDraws(spec).failure_probabilities(int(n_train))
    return float(np.count_nonzero(probs >= 1.0)) / probs.size


def closed_form_error_1d_uniform(delta: float, n_train: int, box: UniformBox) -> float:
    """Exact 1-D error when train and test are the same uniform interval."""
    if box.dim != 1:
        raise DimensionMismatchError(f"closed form needs a 1-D box, got dimension {box.dim}")
    if not delta > 0:
        raise InputError(f"delta must be positive, got {delta!r}")
    if n_train < 1:
        raise InputError(f"n_train must be >= 1, got {n_train}")
    f = 1.0 / float(box.upper[0] - box.lower[0])
    return min(1.0, 1.0 / (2.0 * n_train * f * delta))
