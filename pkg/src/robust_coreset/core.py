"""Shared containers: metric backends, weighted point sets, (r,k)-instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TRIANGLE_CHECK_LIMIT = 512


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def dist_pow(d: np.ndarray, z: float) -> np.ndarray:
    """dist**z with dist == 0 mapped to 0 (valid for non-integer z)."""
    d = np.asarray(d, dtype=np.float64)
    if z == 1:
        return d
    if z == 2:
        return d * d
    out = np.zeros_like(d)
    pos = d > 0
    out[pos] = np.exp(z * np.log(d[pos]))
    return out


class MetricSpace:
    """Distance oracle. Subclasses decide what a "point" is."""

    kind = "abstract"

    def pairwise(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def dist(self, p, q) -> float:
        return float(self.pairwise(self.as_points([p]), self.as_points([q]))[0, 0])

    def as_points(self, pts) -> np.ndarray:
        raise NotImplementedError

    def nearest(self, pts, centers) -> tuple[np.ndarray, np.ndarray]:
        """Distance to, and index of, the nearest center (lowest index on ties)."""
        pts = self.as_points(pts)
        centers = self.as_points(centers)
        if len(pts) == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        dm = self.pairwise(pts, centers)
        idx = np.argmin(dm, axis=1)
        return dm[np.arange(len(pts)), idx], idx


class EuclideanMetric(MetricSpace):
    kind = "euclidean"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)

    def as_points(self, pts) -> np.ndarray:
        arr = np.asarray(pts, dtype=np.float64)
        if arr.ndim == 1 and self.dim == 1:
            arr = arr.reshape(-1, 1)
        if arr.size == 0:
            return arr.reshape(0, self.dim)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {arr.shape}")
        return arr

    def pairwise(self, a, b) -> np.ndarray:
        a = self.as_points(a)
        b = self.as_points(b)
        if self.dim == 1:
            return np.abs(a[:, 0:1] - b[:, 0][None, :])
        # Direct differences; the Gram trick loses precision near zero.
        out = np.zeros((len(a), len(b)))
        for j in range(len(b)):
            diff = a - b[j]
            out[:, j] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return out

    def __repr__(self):
        return f"EuclideanMetric(dim={self.dim})"


class ExplicitMetric(MetricSpace):
    """Finite metric given by a symmetric distance matrix; points are row indices."""

    kind = "explicit"

    def __init__(self, matrix, validate: bool = True, tol: float = 1e-9):
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.all(np.isfinite(mat)):
            raise ValueError("distance matrix must be finite")
        self.triangle_checked = False
        if validate:
            if np.any(mat < -tol):
                raise ValueError("distances must be nonnegative")
            if np.any(np.abs(mat - mat.T) > tol):
                raise ValueError("distance matrix must be symmetric")
            if np.any(np.abs(np.diag(mat)) > tol):
                raise ValueError("dist(p, p) must be 0")
            if len(mat) <= TRIANGLE_CHECK_LIMIT:
                for k in range(len(mat)):
                    if np.any(mat > mat[:, k:k + 1] + mat[k:k + 1, :] + tol):
                        raise ValueError("distance matrix violates the triangle inequality")
                self.triangle_checked = True
        mat = np.maximum((mat + mat.T) / 2, 0.0)
        np.fill_diagonal(mat, 0.0)
        self.matrix = _frozen(mat)

    @property
    def size(self) -> int:
        return len(self.matrix)

    def as_points(self, pts) -> np.ndarray:
        arr = np.asarray(pts)
        if arr.size == 0:
            return np.zeros(0, dtype=np.int64)
        arr = arr.astype(np.int64).reshape(-1)
        if arr.min() < 0 or arr.max() >= self.size:
            raise ValueError("point index outside the metric universe")
        return arr

    def pairwise(self, a, b) -> np.ndarray:
        return self.matrix[np.ix_(self.as_points(a), self.as_points(b))]

    def __repr__(self):
        return f"ExplicitMetric(n={self.size})"


@dataclass(frozen=True)
class WeightedPointSet:
    """Points with nonnegative weights. ``ids`` carry point identity across subsets."""

    points: np.ndarray
    weights: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        pts = np.asarray(self.points)
        if len(pts) != len(w) or len(ids) != len(w):
            raise ValueError("points, weights and ids must have equal length")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if pts.dtype.kind == "f" and not np.all(np.isfinite(pts)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "ids", _frozen(ids))

    @classmethod
    def unweighted(cls, points, ids=None) -> "WeightedPointSet":
        pts = np.asarray(points)
        n = len(pts)
        return cls(pts, np.ones(n), np.arange(n) if ids is None else ids)

    @classmethod
    def empty_like(cls, other: "WeightedPointSet") -> "WeightedPointSet":
        return other.take(np.zeros(0, dtype=np.int64))

    @property
    def size_count(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)

    def take(self, idx, weights=None) -> "WeightedPointSet":
        idx = np.asarray(idx, dtype=np.int64)
        w = self.weights[idx] if weights is None else weights
        return WeightedPointSet(self.points[idx], w, self.ids[idx])

    def with_weights(self, weights) -> "WeightedPointSet":
        return WeightedPointSet(self.points, weights, self.ids)

    @staticmethod
    def concat(parts: Sequence["WeightedPointSet"]) -> "WeightedPointSet":
        parts = [p for p in parts if p is not None]
        if not parts:
            raise ValueError("nothing to concatenate")
        nonempty = [p for p in parts if len(p)] or parts[:1]
        return WeightedPointSet(
            np.concatenate([p.points for p in nonempty]),
            np.concatenate([p.weights for p in nonempty]),
            np.concatenate([p.ids for p in nonempty]),
        )


def as_centers(metric: MetricSpace, centers) -> np.ndarray:
    c = metric.as_points(centers)
    if len(c) == 0:
        raise ValueError("center set must be nonempty")
    return c


@dataclass(frozen=True)
class RkInstance:
    """Point set covered by balls of a common radius around the anchors.

    ``assignment[i]`` is the anchor index of ``data`` row ``i``.
    """

    data: WeightedPointSet
    anchors: np.ndarray
    radius: float
    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "anchors", _frozen(self.anchors))
        object.__setattr__(self, "assignment", _frozen(np.asarray(self.assignment, dtype=np.int64)))
        if len(self.assignment) != len(self.data):
            raise ValueError("assignment must cover every point")

    @property
    def n_anchors(self) -> int:
        return len(self.anchors)

    def clusters(self) -> list[np.ndarray]:
        """Row indices of each anchor's cluster (possibly empty)."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.n_anchors + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.n_anchors)]

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_anchors)

    def cluster_weights(self) -> np.ndarray:
        return np.bincount(self.assignment, weights=self.data.weights, minlength=self.n_anchors)

    def check_radius(self, metric: MetricSpace) -> bool:
        if len(self.data) == 0:
            return True
        d = metric.pairwise(self.data.points, self.anchors)[np.arange(len(self.data)), self.assignment]
        return bool(np.all(d <= self.radius + 1e-9 * max(self.radius, 1.0)))

    def restrict(self, anchor_idx) -> "RkInstance":
        """Sub-instance made of the given clusters, anchors renumbered in the given order."""
        anchor_idx = np.asarray(anchor_idx, dtype=np.int64)
        remap = -np.ones(self.n_anchors, dtype=np.int64)
        remap[anchor_idx] = np.arange(len(anchor_idx))
        rows = np.flatnonzero(remap[self.assignment] >= 0)
        return RkInstance(self.data.take(rows), self.anchors[anchor_idx], self.radius,
                          remap[self.assignment[rows]])


class RegularInstance(RkInstance):
    """(r,k0)-instance whose nonempty clusters differ in size by at most a factor 2."""

    def __post_init__(self):
        super().__post_init__()
        sizes = self.cluster_sizes()
        sizes = sizes[sizes > 0]
        if len(sizes) and sizes.max() > 2 * sizes.min():
            raise ValueError(f"cluster sizes {sizes.tolist()} violate the regularity condition")

    @classmethod
    def of(cls, inst: RkInstance) -> "RegularInstance":
        return cls(inst.data, inst.anchors, inst.radius, inst.assignment)


def make_rk_instance(data: WeightedPointSet, anchors, metric: MetricSpace) -> RkInstance:
    anchors = as_centers(metric, anchors)
    if len(data) == 0:
        return RkInstance(data, anchors, 0.0, np.zeros(0, dtype=np.int64))
    d, idx = metric.nearest(data.points, anchors)
    return RkInstance(data, anchors, float(d.max()), idx)


@dataclass(frozen=True)
class Params:
    k: int
    m: int
    eps: float
    z: float = 1.0
    dim: float = 1.0
    seed: int = 0
    sample_override: Optional[int] = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError("m must be a nonnegative integer")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not self.z >= 1:
            raise ValueError("z must be >= 1")
        if not self.dim > 0:
            raise ValueError("structural dimension must be positive")
        if self.sample_override is not None and self.sample_override < 1:
            raise ValueError("sample override must be >= 1")

    @property
    def inv_eps_ceil(self) -> int:
        return math.ceil(1 / self.eps - 1e-12)


@dataclass
class Decomposition:
    far: WeightedPointSet
    rings: list  # RkInstance per nonempty ring; radius is the ring's nominal bound
    inner: RkInstance
    inner_radius: float
    inner_bound: float = math.inf
    inner_bound_ok: bool = True
    robust_cost_star: float = 0.0
    info: dict = field(default_factory=dict)

    def parts(self) -> list[WeightedPointSet]:
        return [self.far] + [r.data for r in self.rings] + [self.inner.data]


@dataclass
class CoresetReport:
    coreset: WeightedPointSet
    additive_budget: float
    stage_sizes: dict
    sample_sizes_used: dict
    seed: int
    wall_times: dict
    delta_ledger: dict = field(default_factory=dict)
    centers_star: Optional[np.ndarray] = None
    robust_cost_star: float = 0.0
    flags: list = field(default_factory=list)
