"""The distance-based failure probability and the local cell geometry feeding it.

A test point at distance ``r`` from its closest training feature vector is
misclassified with probability ``min(1, r / delta)``. The estimator replaces
``r`` by its expectation inside a local cell whose side shrinks with the
training density: ``kappa * (N * f_train)^(-1/d)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from samplex.errors import InputError
from samplex.geometry import cube_constant

METRICS = ("l2", "squared_l2")


def default_correction(dim: int) -> float:
    # 1-D spacing is doubled to account for the spread of neighbouring gaps;
    # no correction is applied in higher dimensions.
    return 2.0 if dim == 1 else 1.0


@dataclass(frozen=True)
class ErrorModelConfig:
    delta: float
    dim: int
    correction: Optional[float] = None
    cube_constant: Optional[float] = None
    metric: str = "l2"

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise InputError(f"delta must be a positive finite number, got {self.delta!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError(f"dim must be a positive integer, got {self.dim!r}")
        if self.metric not in METRICS:
            raise InputError(f"metric must be one of {METRICS}, got {self.metric!r}")
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "dim", int(self.dim))
        if self.correction is None:
            object.__setattr__(self, "correction", default_correction(self.dim))
        elif not self.correction > 0:
            raise InputError(f"correction must be positive, got {self.correction!r}")
        if self.cube_constant is None:
            object.__setattr__(self, "cube_constant", cube_constant(self.dim))
        elif not self.cube_constant > 0:
            raise InputError(f"cube_constant must be positive, got {self.cube_constant!r}")

    def with_delta(self, delta: float) -> "ErrorModelConfig":
        return dataclasses.replace(self, delta=delta)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict, dim: Optional[int] = None) -> "ErrorModelConfig":
        if not isinstance(doc, dict):
            raise InputError("model must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown model field(s): {sorted(unknown)}")
        fields = dict(doc)
        if "dim" not in fields:
            if dim is None:
                raise InputError("model.dim is required")
            fields["dim"] = dim
        if "delta" not in fields:
            raise InputError("model.delta is required")
        return cls(**fields)


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def metric_value(config: ErrorModelConfig, distance) -> np.ndarray:
    """The quantity compared against delta: the distance, or its square."""
    r = np.asarray(distance, dtype=np.float64)
    return r * r if config.metric == "squared_l2" else r


def phi(config: ErrorModelConfig, distance):
    """Failure probability for a test point at ``distance`` from the training set."""
    return _out(np.minimum(1.0, metric_value(config, distance) / config.delta))


def cell_side(config: ErrorModelConfig, train_density, n_train):
    """Side of the local training cell; infinite where the training density is 0."""
    if n_train < 1:
        raise InputError(f"n_train must be >= 1, got {n_train}")
    f = np.asarray(train_density, dtype=np.float64)
    with np.errstate(divide="ignore"):
        side = config.correction * np.power(n_train * f, -1.0 / config.dim)
    return _out(side)


def expected_nn_distance(config: ErrorModelConfig, side):
    """Mean distance from a uniform point of a cell to the nearest cell vertex.

    In 1-D this is side/4; in d dimensions it is (side/2) * c_d with c_d the
    mean norm of a uniform point in the unit cube.
    """
    a = np.asarray(side, dtype=np.float64)
    if config.dim == 1:
        return _out(a / 4.0)
    return _out(a / 2.0 * config.cube_constant)
