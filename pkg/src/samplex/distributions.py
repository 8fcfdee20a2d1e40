"""Train/test feature distributions: densities, seeded sampling and Gaussian MLE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from samplex.errors import DegenerateFitError, DimensionMismatchError, InputError
from samplex.geometry import PointSet


def _vector(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if arr.ndim != 1 or arr.size < 1:
        raise InputError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to (n, dim); report whether a single point was passed."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
        single = True
    elif arr.ndim == 1:
        single = dim > 1 or arr.size == 1
        arr = arr[None, :] if single else arr[:, None]
    else:
        single = False
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatchError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


@dataclass(frozen=True)
class DiagGaussian:
    """Gaussian with diagonal covariance; ``variance`` is diag(Sigma)."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = _vector(self.mean, "mean")
        var = _vector(self.variance, "variance")
        if mean.shape != var.shape:
            raise DimensionMismatchError(
                f"mean has length {mean.size} but variance has length {var.size}"
            )
        if np.any(var <= 0):
            raise InputError("variance components must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x):
        pts, single = _points(x, self.dim)
        z2 = np.sum((pts - self.mean) ** 2 / self.variance, axis=1)
        log_norm = 0.5 * np.sum(np.log(2.0 * math.pi * self.variance))
        out = -0.5 * z2 - log_norm
        return float(out[0]) if single else out

    def pdf(self, x):
        out = np.exp(self.logpdf(x))
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, n: int, seed) -> PointSet:
        _check_count(n)
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((n, self.dim))
        return PointSet(self.mean + np.sqrt(self.variance) * z)

    def to_dict(self) -> dict:
        return {"type": "diag_gaussian", "mean": self.mean.tolist(), "variance": self.variance.tolist()}


@dataclass(frozen=True)
class UniformBox:
    """Uniform density on the axis-aligned box [lower, upper]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _vector(self.lower, "lower")
        hi = _vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise DimensionMismatchError(f"lower has length {lo.size} but upper has length {hi.size}")
        if np.any(lo >= hi):
            raise InputError("uniform box needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def density(self) -> float:
        return float(1.0 / np.prod(self.upper - self.lower))

    def pdf(self, x):
        pts, single = _points(x, self.dim)
        inside = np.all((pts >= self.lower) & (pts <= self.upper), axis=1)
        out = np.where(inside, self.density, 0.0)
        return float(out[0]) if single else out

    def sample(self, n: int, seed) -> PointSet:
        _check_count(n)
        rng = np.random.default_rng(seed)
        u = rng.random((n, self.dim))
        return PointSet(self.lower + (self.upper - self.lower) * u)

    def to_dict(self) -> dict:
        return {"type": "uniform_box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


Distribution = Union[DiagGaussian, UniformBox]


def _check_count(n: int) -> None:
    if int(n) != n or n < 1:
        raise InputError(f"sample count must be a positive integer, got {n!r}")


def pdf(dist: Distribution, x):
    return dist.pdf(x)


def sample(dist: Distribution, n: int, seed) -> PointSet:
    """Draw ``n`` i.i.d. points; identical (dist, n, seed) gives bit-identical output."""
    return dist.sample(n, seed)


def fit_diag_gaussian(points) -> DiagGaussian:
    """Maximum-likelihood diagonal Gaussian (variance uses the 1/n estimator)."""
    x = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise DegenerateFitError(f"need at least 2 points to fit a Gaussian, got {x.shape[0]}")
    mean = x.mean(axis=0)
    var = np.mean((x - mean) ** 2, axis=0)
    flat = np.flatnonzero(var <= 0)
    if flat.size:
        raise DegenerateFitError(f"zero variance in coordinate(s) {flat.tolist()}")
    return DiagGaussian(mean, var)


def dist_from_dict(doc: dict) -> Distribution:
    if not isinstance(doc, dict) or "type" not in doc:
        raise InputError("distribution must be an object with a 'type' field")
    kind = doc["type"]
    try:
        if kind == "diag_gaussian":
            return DiagGaussian(doc["mean"], doc["variance"])
        if kind == "uniform_box":
            return UniformBox(doc["lower"], doc["upper"])
    except KeyError as exc:
        raise InputError(f"distribution of type {kind!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad {kind} parameters: {exc}") from None
    raise InputError(f"unknown distribution type {kind!r}")


def dist_to_dict(dist: Distribution) -> dict:
    return dist.to_dict()
