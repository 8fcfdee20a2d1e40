"""Monte Carlo measurement of learning curves under the distance error model.

For each training size N and seed, a fresh training set and a fresh test set
are drawn, every test point is matched to its nearest training point, and it
fails with probability ``phi(distance)``. The per-N error is the mean failure
rate across seeds; the spread is the standard deviation across seeds.

Seeding: the (N, seed index) pair is hashed into its own substream with
``SeedSequence(base_seed, spawn_key=(N, seed_index))``, and that substream is
split into three children for the training draw, the test draw and the
failure coin flips. Keying on the value of N (not its grid position) means
adding grid points never changes existing rows.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from samplex.distributions import Distribution, dist_from_dict
from samplex.error_model import ErrorModelConfig, phi
from samplex.errors import DimensionMismatchError, InputError
from samplex.geometry import NnIndex, PointSet

CURVE_KINDS = ("empirical", "theoretical")


@dataclass(frozen=True)
class LearningCurve:
    n: np.ndarray
    error: np.ndarray
    spread: np.ndarray
    kind: str = "empirical"

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.int64).reshape(-1)
        err = np.asarray(self.error, dtype=np.float64).reshape(-1)
        spread = np.asarray(self.spread, dtype=np.float64).reshape(-1)
        if not (n.size == err.size == spread.size):
            raise InputError("learning curve columns must have equal length")
        if n.size and (np.any(n < 1) or np.any(np.diff(n) <= 0)):
            raise InputError("learning curve N values must be positive and strictly increasing")
        if np.any(~np.isfinite(err)) or np.any((err < 0) | (err > 1)):
            raise InputError("learning curve errors must lie in [0, 1]")
        if np.any(~np.isfinite(spread)) or np.any(spread < 0):
            raise InputError("learning curve spreads must be nonnegative")
        if self.kind not in CURVE_KINDS:
            raise InputError(f"curve kind must be one of {CURVE_KINDS}")
        for name, arr in (("n", n), ("error", err), ("spread", spread)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.n.size

    def points(self) -> list[tuple[int, float, float]]:
        return [(int(a), float(b), float(c)) for a, b, c in zip(self.n, self.error, self.spread)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "error", "spread"])
        for n, err, spread in self.points():
            writer.writerow([n, repr(err), repr(spread)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, kind: str = "empirical") -> "LearningCurve":
        """Parse ``n,error[,spread]`` CSV text; a missing spread column means 0."""
        reader = csv.DictReader(io.StringIO(text))
        header = reader.fieldnames or []
        missing = {"n", "error"} - set(header)
        if missing:
            raise InputError(f"learning curve CSV is missing column(s) {sorted(missing)}")
        ns, errs, spreads = [], [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                n = float(row["n"])
                if n != int(n):
                    raise ValueError("n must be an integer")
                ns.append(int(n))
                errs.append(float(row["error"]))
                spreads.append(float(row.get("spread") or 0.0))
            except (TypeError, ValueError) as exc:
                raise InputError(f"learning curve CSV line {lineno}: {exc}") from None
        return cls(ns, errs, spreads, kind=kind)

    @classmethod
    def read_csv(cls, path, kind: str = "empirical") -> "LearningCurve":
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read(), kind=kind)


def _check_grid(n_grid: Sequence[int], name: str = "n_grid") -> np.ndarray:
    grid = np.asarray(list(n_grid))
    if grid.size == 0:
        raise InputError(f"{name} must not be empty")
    if not np.all(grid == np.floor(grid)) or np.any(grid < 1):
        raise InputError(f"{name} entries must be positive integers")
    if np.any(np.diff(grid) <= 0):
        raise InputError(f"{name} must be strictly increasing")
    return grid.astype(np.int64)


@dataclass(frozen=True)
class SimulationSpec:
    train_dist: Distribution
    test_dist: Distribution
    n_grid: tuple
    m_test: int
    n_seeds: int
    model: ErrorModelConfig
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in _check_grid(self.n_grid)))
        if int(self.m_test) != self.m_test or self.m_test < 1:
            raise InputError("m_test must be a positive integer")
        if int(self.n_seeds) != self.n_seeds or self.n_seeds < 1:
            raise InputError("n_seeds must be a positive integer")
        dims = {self.train_dist.dim, self.test_dist.dim, self.model.dim}
        if len(dims) != 1:
            raise DimensionMismatchError(
                f"train_dist, test_dist and model must share one dimension, got "
                f"{self.train_dist.dim}, {self.test_dist.dim}, {self.model.dim}"
            )

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulationSpec":
        doc = _require(doc, ("train_dist", "test_dist", "n_grid", "m_test", "n_seeds", "model"))
        train = dist_from_dict(doc["train_dist"])
        return cls(
            train_dist=train,
            test_dist=dist_from_dict(doc["test_dist"]),
            n_grid=_int_list(doc["n_grid"], "n_grid"),
            m_test=_int_field(doc["m_test"], "m_test"),
            n_seeds=_int_field(doc["n_seeds"], "n_seeds"),
            model=ErrorModelConfig.from_dict(doc["model"], dim=train.dim),
            base_seed=_int_field(doc.get("base_seed", 0), "base_seed"),
        )

    def to_dict(self) -> dict:
        return {
            "train_dist": self.train_dist.to_dict(),
            "test_dist": self.test_dist.to_dict(),
            "n_grid": list(self.n_grid),
            "m_test": self.m_test,
            "n_seeds": self.n_seeds,
            "base_seed": self.base_seed,
            "model": self.model.to_dict(),
        }


def _require(doc, keys: Iterable[str]) -> dict:
    if not isinstance(doc, dict):
        raise InputError("configuration must be a JSON object")
    for key in keys:
        if key not in doc:
            raise InputError(f"missing required field {key!r}")
    return doc


def _int_field(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise InputError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _int_list(values, name: str) -> list[int]:
    if not isinstance(values, list):
        raise InputError(f"{name} must be a list of integers")
    if not values:
        raise InputError(f"{name} must not be empty")
    return [_int_field(v, name) for v in values]


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else ``SAMPLEX_THREADS``, else the number of cores."""
    if threads is None:
        env = os.environ.get("SAMPLEX_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise InputError(f"SAMPLEX_THREADS must be an integer, got {env!r}") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise InputError(f"thread count must be >= 1, got {threads}")
    return threads


def simulate_error_rate(
    train: PointSet,
    test: PointSet,
    model: ErrorModelConfig,
    seed,
    index: Optional[NnIndex] = None,
) -> float:
    """Fraction of test points that fail one Bernoulli(phi) draw each."""
    if len(train) == 0 or len(test) == 0:
        raise InputError("train and test sets must be non-empty")
    if train.dim != test.dim:
        raise DimensionMismatchError(f"train has dimension {train.dim}, test has {test.dim}")
    if index is None:
        index = NnIndex(train)
    dist, _ = index.query(test.points)
    u = np.random.default_rng(seed).random(len(test))
    failures = np.count_nonzero(u < phi(model, dist))
    return failures / len(test)


def _one_run(spec: SimulationSpec, n: int, seed_index: int) -> float:
    root = np.random.SeedSequence(spec.base_seed, spawn_key=(n, seed_index))
    train_ss, test_ss, coin_ss = root.spawn(3)
    train = spec.train_dist.sample(n, train_ss)
    test = spec.test_dist.sample(spec.m_test, test_ss)
    return simulate_error_rate(train, test, spec.model, coin_ss)


def run_simulation(spec: SimulationSpec, threads: Optional[int] = None) -> LearningCurve:
    """Empirical learning curve: mean and std (ddof=1) of error rates over seeds."""
    jobs = [(n, s) for n in spec.n_grid for s in range(spec.n_seeds)]
    workers = resolve_threads(threads)
    if workers == 1:
        rates = [_one_run(spec, n, s) for n, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rates = list(pool.map(lambda job: _one_run(spec, *job), jobs))
    table = np.asarray(rates, dtype=np.float64).reshape(len(spec.n_grid), spec.n_seeds)
    error = table.mean(axis=1)
    spread = table.std(axis=1, ddof=1) if spec.n_seeds > 1 else np.zeros(len(spec.n_grid))
    return LearningCurve(spec.n_grid, error, spread, kind="empirical")
