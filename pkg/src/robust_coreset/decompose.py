"""Splitting a dataset into far points, ring instances and a small-radius inner instance."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import (Decomposition, MetricSpace, Params, RegularInstance, RkInstance,
                   WeightedPointSet, as_centers, dist_pow)
from .cost import trimmed_costs


def euclidean_gamma(z: float) -> float:
    """Constant in the z > 1 Euclidean threshold; 1 at z = 1."""
    return 1.0 if z == 1 else (6.0 * z) ** z


def _nearest(X, C, metric):
    d, idx = metric.nearest(X.points, C)
    return d, idx


def _far_order(d: np.ndarray) -> np.ndarray:
    # farthest first; equal distances: lower row first
    return np.argsort(-d, kind="stable")


def _instance(X, rows, C, radius, assign) -> RkInstance:
    rows = np.sort(rows)
    return RkInstance(X.take(rows), C, float(radius), assign[rows])


def decompose_metric_z(X: WeightedPointSet, C_star, params: Params, metric: MetricSpace) -> Decomposition:
    """Far set of the m + ceil(1/eps) farthest points, dyadic rings, and the inner rest.

    Balls are closed: B_i = {y : dist^z(y, C*) <= 2^i * eps * r^z} with r^z the
    mean z-cost of the non-far points.
    """
    C = as_centers(metric, C_star)
    z, eps, m, k = params.z, params.eps, params.m, params.k
    n = len(X)
    d, assign = _nearest(X, C, metric)
    dz = dist_pow(d, z)
    cost_m = float(trimmed_costs(dz, X.weights, [min(m, X.total_weight)])[0]) if n else 0.0
    n_far = m + params.inv_eps_ceil
    empty = X.take(np.zeros(0, dtype=np.int64))
    empty_inst = RkInstance(empty, C, 0.0, np.zeros(0, dtype=np.int64))
    if n <= n_far:
        return Decomposition(X, [], empty_inst, 0.0, robust_cost_star=cost_m,
                             info={"T": None, "s": 0, "r_z": 0.0})
    order = _far_order(d)
    far_rows = np.sort(order[:n_far])
    y_rows = np.sort(order[n_far:])
    far = X.take(far_rows)
    ydz = dz[y_rows]
    r_z = float(ydz.mean())
    mk = max(m, 1) * k
    info = {"r_z": r_z}
    if r_z == 0:
        inner = _instance(X, y_rows, C, 0.0, assign)
        info.update(T=0, s=0)
        return Decomposition(far, [], inner, 0.0, robust_cost_star=cost_m, info=info)
    base = eps * r_z
    # ring index: smallest i >= 0 with dz <= 2^i * base
    ratio = ydz / base
    ring = np.zeros(len(y_rows), dtype=np.int64)
    big = ratio > 1
    ring[big] = np.ceil(np.log2(ratio[big])).astype(np.int64)
    # guard against log2 rounding at exact powers of two
    ring = np.where(ydz <= np.ldexp(base, ring - 1), ring - 1, ring)
    ring = np.where(ydz > np.ldexp(base, ring), ring + 1, ring)
    ring = np.maximum(ring, 0)
    T = int(ring.max())
    s = min(math.ceil(z + math.log2(mk) - 1e-12), T)
    rings = []
    for j in range(T - s + 1, T + 1):
        rows = y_rows[ring == j]
        if len(rows):
            r_j = (2.0 ** j * base) ** (1.0 / z)
            rings.append(_instance(X, rows, C, r_j, assign))
    inner_rows = y_rows[ring <= T - s]
    r_in = float(d[inner_rows].max()) if len(inner_rows) else 0.0
    inner = _instance(X, inner_rows, C, r_in, assign)
    bound = eps * (cost_m / mk) ** (1.0 / z)
    ok = r_in <= bound + 1e-9 * max(1.0, bound)
    if not ok:
        warnings.warn(f"inner radius {r_in:.6g} exceeds the {bound:.6g} target", RuntimeWarning)
    info.update(T=T, s=s, ring_indices=list(range(T - s + 1, T + 1)))
    return Decomposition(far, rings, inner, r_in, inner_bound=bound, inner_bound_ok=ok,
                         robust_cost_star=cost_m, info=info)


def decompose_metric(X: WeightedPointSet, C_star, params: Params, metric: MetricSpace) -> Decomposition:
    if params.z != 1:
        raise ValueError("decompose_metric is the z = 1 case; use decompose_metric_z")
    return decompose_metric_z(X, C_star, params, metric)


def decompose_euclidean(X: WeightedPointSet, C_star, params: Params, metric: MetricSpace):
    """Threshold split: F = points farther than r_in from C*, G = the rest.

    r_in = (eps/m) cost^(m)(X,C*) for z = 1; for z > 1 the threshold is
    (cost^(m)_z / (gamma * m * eps^-z))^(1/z) with gamma = (6z)^z.
    Returns ``(F, G)`` with G an RkInstance anchored at C*.
    """
    C = as_centers(metric, C_star)
    z, eps, m = params.z, params.eps, params.m
    d, assign = _nearest(X, C, metric)
    all_rows = np.arange(len(X))
    if m == 0 or len(X) == 0:
        r = float(d.max()) if len(X) else 0.0
        return X.take(np.zeros(0, dtype=np.int64)), _instance(X, all_rows, C, r, assign)
    dz = dist_pow(d, z)
    cost_m = float(trimmed_costs(dz, X.weights, [min(m, X.total_weight)])[0])
    gamma = euclidean_gamma(z)
    r_in = (cost_m / (gamma * m * eps ** (-z))) ** (1.0 / z)
    far_mask = d > r_in
    far = X.take(all_rows[far_mask])
    limit = m + gamma * m / eps ** z + 1
    if len(far) > limit:
        raise AssertionError(f"|F| = {len(far)} exceeds {limit}")
    G = _instance(X, all_rows[~far_mask], C, r_in, assign)
    return far, G


def split_regular(G: RkInstance, eps: float, z: float = 1.0):
    """Group clusters by size into dyadic buckets above eps^z * n / k.

    Returns ``(small, buckets)``: ``small`` lists (row index of the
    representative, cluster weight) for clusters of size <= eps^z n / k; each
    bucket is a RegularInstance.
    """
    sizes = G.cluster_sizes()
    n = len(G.data)
    k = G.n_anchors
    small, buckets = [], []
    if n == 0:
        return small, buckets
    thr = eps ** z * n / k
    clusters = G.clusters()
    weights = G.cluster_weights()
    by_bucket: dict[int, list[int]] = {}
    for i, size in enumerate(sizes):
        if size == 0:
            continue
        if size <= thr:
            small.append((int(clusters[i].min()), float(weights[i])))
            continue
        j = max(1, math.ceil(math.log2(size / thr) - 1e-12))
        while size > 2 ** j * thr:
            j += 1
        while j > 1 and size <= 2 ** (j - 1) * thr:
            j -= 1
        by_bucket.setdefault(j, []).append(i)
    for j in sorted(by_bucket):
        buckets.append(RegularInstance.of(G.restrict(by_bucket[j])))
    return small, buckets
