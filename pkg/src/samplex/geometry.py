"""Point sets, exact nearest-neighbour search and unit-cube distance constants."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special
from scipy.spatial import cKDTree

from samplex.errors import DimensionMismatchError, InputError

KDTREE_MAX_DIM = 8
_BRUTE_CHUNK = 1 << 22  # max elements of one (queries x points) distance block
# kd-tree distances are computed with a different operation order than ours; any
# point within this relative slack of the reported minimum is re-checked exactly.
_TIE_SLACK = 1e-9


@dataclass(frozen=True)
class PointSet:
    """An ordered set of d-dimensional vectors with optional integer labels."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    dim: int = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise InputError(f"points must be a 2-D array (n, d), got shape {pts.shape}")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dim", int(pts.shape[1]))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (pts.shape[0],):
                raise InputError(
                    f"labels must align with points: {labels.shape} vs {pts.shape[0]} points"
                )
            if labels.size and not np.issubdtype(labels.dtype, np.integer):
                as_int = labels.astype(np.int64)
                if not np.array_equal(as_int, labels):
                    raise InputError("labels must be integers")
                labels = as_int
            labels = labels.astype(np.int64, copy=True)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None


def squared_distances(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared L2 distances, accumulated coordinate by coordinate.

    ``points`` and ``query`` broadcast against each other along the leading
    axes; the last axis is the coordinate axis. Every element goes through the
    same sequence of IEEE operations regardless of array shape, so the kd-tree
    path and the brute-force oracle produce bit-identical values.
    """
    acc = np.square(points[..., 0] - query[..., 0])
    for j in range(1, points.shape[-1]):
        acc = acc + np.square(points[..., j] - query[..., j])
    return acc


def brute_force_nearest(points: np.ndarray, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive nearest neighbour: returns (L2 distances, indices); ties go to the lowest index."""
    points = np.asarray(points, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    m, n = queries.shape[0], points.shape[0]
    idx = np.empty(m, dtype=np.int64)
    best = np.empty(m, dtype=np.float64)
    step = max(1, _BRUTE_CHUNK // max(n, 1))
    for start in range(0, m, step):
        q = queries[start:start + step]
        d2 = squared_distances(points[None, :, :], q[:, None, :])
        i = np.argmin(d2, axis=1)
        idx[start:start + step] = i
        best[start:start + step] = d2[np.arange(q.shape[0]), i]
    return np.sqrt(best), idx


class NnIndex:
    """Immutable exact nearest-neighbour index over a :class:`PointSet`.

    Uses a kd-tree for ``dim <= 8`` and an exhaustive scan above that. Results
    match :func:`brute_force_nearest` exactly, including the tie-break.
    """

    def __init__(self, train: PointSet, workers: int = 1):
        if len(train) == 0:
            raise InputError("cannot build a nearest-neighbour index over an empty point set")
        self._train = train
        self._workers = workers
        self._tree = cKDTree(train.points) if train.dim <= KDTREE_MAX_DIM else None

    @property
    def dim(self) -> int:
        return self._train.dim

    @property
    def train(self) -> PointSet:
        return self._train

    def __len__(self) -> int:
        return len(self._train)

    def query(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Nearest training point for each query row: (distances, indices)."""
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q[None, :] if self.dim > 1 or q.size == 1 else q[:, None]
        if q.ndim != 2 or q.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"query dimension {q.shape[-1] if q.ndim else 0} does not match index dimension {self.dim}"
            )
        pts = self._train.points
        if self._tree is None:
            return brute_force_nearest(pts, q)

        _, idx = self._tree.query(q, k=1, workers=self._workers)
        idx = np.asarray(idx, dtype=np.int64)
        d2 = squared_distances(pts[idx], q)
        radius = np.sqrt(d2) * (1.0 + _TIE_SLACK) + np.finfo(float).tiny
        counts = self._tree.query_ball_point(q, radius, return_length=True, workers=self._workers)
        for i in np.flatnonzero(counts > 1):
            cand = np.sort(np.asarray(self._tree.query_ball_point(q[i], radius[i]), dtype=np.int64))
            cd2 = squared_distances(pts[cand], q[i])
            j = int(np.argmin(cd2))
            idx[i] = cand[j]
            d2[i] = cd2[j]
        return np.sqrt(d2), idx


def build_index(train: PointSet, workers: int = 1) -> NnIndex:
    return NnIndex(train, workers=workers)


def nearest_distance(index: NnIndex, query):
    """L2 distance from ``query`` to its closest indexed point.

    A single vector gives a float; a (m, d) array gives an array of m distances.
    """
    q = np.asarray(query, dtype=np.float64)
    single = q.ndim == 0 or (q.ndim == 1 and (index.dim > 1 or q.size == 1))
    dist, _ = index.query(np.atleast_1d(q))
    return float(dist[0]) if single else dist


def unit_cube_mean_norm(d: int, samples: int, seed) -> float:
    """Monte Carlo estimate of the mean L2 norm of a uniform point in [0, 1]^d."""
    if d < 1 or samples < 1:
        raise InputError(f"need d >= 1 and samples >= 1 (got d={d}, samples={samples})")
    rng = np.random.default_rng(seed)
    step = max(1, (1 << 20) // d)
    partial = []
    for start in range(0, samples, step):
        u = rng.random((min(step, samples - start), d))
        partial.append(math.fsum(np.sqrt(np.sum(u * u, axis=1))))
    return math.fsum(partial) / samples


def _uniform_gauss_transform(t: float) -> float:
    # E[exp(-t U^2)] for U ~ U[0, 1]
    if t < 1e-3:
        return 1.0 - t / 3.0 + t * t / 10.0 - t ** 3 / 42.0 + t ** 4 / 216.0
    s = math.sqrt(t)
    return math.sqrt(math.pi) * special.erf(s) / (2.0 * s)


@functools.lru_cache(maxsize=None)
def cube_constant(d: int) -> float:
    """Mean L2 norm c_d of a uniform point in [0, 1]^d, by deterministic quadrature.

    Uses sqrt(s) = 1/(2 sqrt(pi)) * int_0^inf (1 - exp(-t s)) t^(-3/2) dt, which
    turns the d-fold integral into a 1-D integral over a product of identical
    one-coordinate transforms.
    """
    if d < 1:
        raise InputError(f"dimension must be >= 1, got {d}")
    if d == 1:
        return 0.5
    if d == 2:
        return (math.sqrt(2.0) + math.asinh(1.0)) / 3.0

    def integrand(t):
        return -math.expm1(d * math.log(_uniform_gauss_transform(t))) * t ** -1.5

    head, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    tail, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return (head + tail) / (2.0 * math.sqrt(math.pi))
