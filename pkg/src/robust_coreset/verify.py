"""Empirical certification of robust coresets and the diagnostics they rest on."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import MetricSpace, RkInstance, WeightedPointSet
from .cost import BudgetError, point_costs, robust_profiles

EXHAUSTIVE_POOL_LIMIT = 25
EXHAUSTIVE_BUDGET = 200_000


def thread_count() -> int:
    raw = os.environ.get("ROBUST_CORESET_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass
class CertReport:
    pass_rate: float
    max_rel: float
    max_add: float
    witness: dict
    relative_errors: np.ndarray
    n_center_sets: int
    m: int

    def as_dict(self) -> dict:
        rel = self.relative_errors
        return {
            "max_rel": self.max_rel,
            "max_add": self.max_add,
            "pass_rate": self.pass_rate,
            "witness": self.witness,
            "center_sets": self.n_center_sets,
            "rel_quantiles": {q: float(np.quantile(rel, float(q))) for q in ("0.5", "0.9", "0.99")}
            if rel.size else {},
        }


def exhaustive_centers(pool, k: int, metric: MetricSpace) -> list:
    pool = metric.as_points(pool)
    if len(pool) > EXHAUSTIVE_POOL_LIMIT:
        raise BudgetError(f"exhaustive mode allows at most {EXHAUSTIVE_POOL_LIMIT} pool points")
    k = min(k, len(pool))
    if math.comb(len(pool), k) > EXHAUSTIVE_BUDGET:
        raise BudgetError("too many center sets for exhaustive certification")
    return [pool[list(c)] for c in itertools.combinations(range(len(pool)), k)]


def random_centers(X: WeightedPointSet, k: int, count: int, rng) -> list:
    n = len(X)
    size = min(k, n)
    return [X.points[rng.choice(n, size=size, replace=False)] for _ in range(count)]


def perturbed_centers(optimum, count: int, rng, scale: float) -> list:
    """Gaussian jitter of a reference solution (Euclidean only)."""
    opt = np.asarray(optimum, dtype=np.float64)
    return [opt + rng.normal(scale=scale, size=opt.shape) for _ in range(count)]


def _chunked_profiles(Y, centers, m, z, metric):
    threads = thread_count()
    if threads <= 1 or len(centers) < 64:
        return robust_profiles(Y, centers, m, z, metric)
    chunks = np.array_split(np.arange(len(centers)), threads)
    with ThreadPoolExecutor(threads) as ex:
        parts = ex.map(lambda idx: robust_profiles(Y, [centers[i] for i in idx], m, z, metric), chunks)
    return np.vstack(list(parts))


def certify_robust_coreset(X: WeightedPointSet, D: WeightedPointSet, m: int, z: float,
                           metric: MetricSpace, eps: float, delta: float, centers) -> CertReport:
    """Check |cost^t(X,C) - cost^t(D,C)| <= eps cost^t(X,C) + delta for all C, t = 0..m."""
    centers = list(centers)
    if not centers:
        raise ValueError("need at least one center set")
    base = _chunked_profiles(X, centers, m, z, metric)
    other = _chunked_profiles(D, centers, m, z, metric)
    err = np.abs(base - other)
    excess = err - eps * base - delta
    passed = excess <= 1e-9 * np.maximum(1.0, base)
    mask = base > 1e-12
    rel = err[mask] / base[mask]
    ci, ti = np.unravel_index(int(np.argmax(excess)), excess.shape)
    witness = {"center_index": int(ci), "t": int(ti), "error": float(err[ci, ti]),
               "cost_x": float(base[ci, ti]), "cost_d": float(other[ci, ti]),
               "centers": np.asarray(centers[ci]).tolist()}
    return CertReport(float(passed.mean()), float(rel.max()) if rel.size else 0.0,
                      float(excess.max()), witness, rel, len(centers), m)


def _cluster_of(inst: RkInstance, D: WeightedPointSet) -> np.ndarray:
    pos = {int(i): r for r, i in enumerate(inst.data.ids)}
    try:
        rows = np.array([pos[int(i)] for i in D.ids], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"coreset point {exc} is not in the instance") from None
    return inst.assignment[rows] if len(rows) else np.zeros(0, dtype=np.int64)


def check_capacity(inst: RkInstance, D: WeightedPointSet) -> float:
    """Largest |weight of D in cluster i - weight of cluster i|."""
    lab = _cluster_of(inst, D)
    got = np.bincount(lab, weights=D.weights, minlength=inst.n_anchors)
    want = inst.cluster_weights()
    return float(np.max(np.abs(got - want))) if inst.n_anchors else 0.0


@dataclass
class DiagnosticReport:
    worst: float
    pass_rate: float
    values: np.ndarray
    witness: dict


def _random_subset(k0: int, rng) -> np.ndarray:
    while True:
        mask = rng.random(k0) < 0.5
        if mask.any():
            return np.flatnonzero(mask)


def check_range_space(inst: RkInstance, D: WeightedPointSet, eps: float, samples: int, rng,
                      metric: MetricSpace, k: int) -> DiagnosticReport:
    """Worst | |X_I cap B(C,r)| - ||D_I cap B(C,r)||_1 | / n over sampled (I, C, r)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    X = inst.data
    n = X.total_weight
    dlab = _cluster_of(inst, D)
    vals = np.empty(samples)
    worst_at = {}
    for s in range(samples):
        I = _random_subset(inst.n_anchors, rng)
        C = X.points[rng.choice(len(X), size=min(k, len(X)), replace=False)]
        dx, _ = metric.nearest(X.points, C)
        dd, _ = metric.nearest(D.points, C) if len(D) else (np.zeros(0), None)
        grid = np.unique(dx)
        radii = np.concatenate([[0.0], (grid[:-1] + grid[1:]) / 2, [grid[-1] + 1]])
        r = radii[rng.integers(len(radii))]
        inx = np.isin(inst.assignment, I)
        ind = np.isin(dlab, I)
        a = X.weights[inx & (dx <= r)].sum()
        b = D.weights[ind & (dd <= r)].sum()
        vals[s] = abs(a - b) / n
        if vals[s] >= vals[:s + 1].max():
            worst_at = {"clusters": I.tolist(), "radius": float(r), "x": float(a), "d": float(b)}
    return DiagnosticReport(float(vals.max()), float(np.mean(vals <= eps + 1e-12)), vals, worst_at)


def check_indexed_subset(inst: RkInstance, D: WeightedPointSet, eps: float, samples: int, rng,
                         metric: MetricSpace, k: int, z: float = 1.0, strong: bool = False,
                         anchors=None) -> DiagnosticReport:
    """Sampled cluster-subset cost preservation.

    Plain: (|cost(X_I,C) - cost(D_I,C)| - eps cost(X_I,C)) / (n r^z), compared to eps.
    Strong: |cost(X_I,C) - cost(D_I,C)| / (cost(X_I,C) + cost(X,A)), compared to eps.
    """
    X = inst.data
    dlab = _cluster_of(inst, D)
    n = X.total_weight
    if strong:
        A = inst.anchors if anchors is None else anchors
        norm_a = float(np.dot(X.weights, point_costs(X, A, z, metric)))
    vals = np.empty(samples)
    worst_at = {}
    for s in range(samples):
        I = _random_subset(inst.n_anchors, rng)
        C = X.points[rng.choice(len(X), size=min(k, len(X)), replace=False)]
        cx = point_costs(X, C, z, metric)
        cd = point_costs(D, C, z, metric)
        inx = np.isin(inst.assignment, I)
        ind = np.isin(dlab, I)
        a = float(np.dot(X.weights[inx], cx[inx]))
        b = float(np.dot(D.weights[ind], cd[ind]))
        if strong:
            denom = a + norm_a
            vals[s] = abs(a - b) / denom if denom > 0 else 0.0
        else:
            denom = n * inst.radius ** z
            excess = abs(a - b) - eps * a
            vals[s] = excess / denom if denom > 0 else (0.0 if excess <= 1e-12 else math.inf)
        if vals[s] >= vals[:s + 1].max():
            worst_at = {"clusters": I.tolist(), "x": a, "d": b}
    return DiagnosticReport(float(vals.max()), float(np.mean(vals <= eps + 1e-12)), vals, worst_at)
