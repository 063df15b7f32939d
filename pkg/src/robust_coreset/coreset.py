"""Coreset constructions for (r,k)-instances and the end-to-end builders."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (CoresetReport, MetricSpace, Params, RkInstance, WeightedPointSet,
                   as_centers, dist_pow)
from .cost import trimmed_costs
from .decompose import decompose_euclidean, decompose_metric_z, euclidean_gamma, split_regular
from .solver import dz_seeding, exact_solver, heuristic_solver

MAX_SAMPLES = 10 ** 15


class InvariantError(AssertionError):
    """A construction-time guarantee (probability sum, weight cap, capacity) failed."""


@dataclass(frozen=True)
class SampleSizePolicy:
    mode: str = "metric"  # "metric" or "euclidean"
    c0: float = 1.0
    polylog: float = 1.0
    override: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("metric", "euclidean"):
            raise ValueError(f"unknown sample-size mode {self.mode!r}")
        if self.c0 <= 0 or self.polylog < 0:
            raise ValueError("c0 must be positive and polylog nonnegative")


def sample_size(policy: SampleSizePolicy, k: int, d: float, eps: float, m: int, z: float = 1.0) -> int:
    if policy.override is not None:
        return int(policy.override)
    if policy.mode == "metric":
        base = k * d / eps ** (2 * z)
        s = (policy.c0 * base * (1 + math.log(k * d / eps + math.e)) ** policy.polylog
             * (1 + math.log(m + 1)) ** 3)
    else:
        base = min(k ** ((2 * z + 2) / (z + 2)) / eps ** 2, k / eps ** (z + 2))
        s = policy.c0 * base * (1 + math.log(k / eps + math.e)) ** policy.polylog
    return int(max(1, min(MAX_SAMPLES, math.ceil(s - 1e-9))))


@dataclass
class Piece:
    """A partial coreset with its additive error budget; unpacks as (coreset, delta)."""

    coreset: WeightedPointSet
    delta: float
    sample_sizes: dict = field(default_factory=dict)
    stages: int = 1
    fallbacks: int = 0

    def __iter__(self):
        yield self.coreset
        yield self.delta


def stage_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & (2 ** 63 - 1), *key])


def _empty(X: WeightedPointSet) -> WeightedPointSet:
    return X.take(np.zeros(0, dtype=np.int64))


def _capacity_rescale(inst: RkInstance, provisional: np.ndarray):
    """Rescale sampled weights so every cluster carries its full weight.

    Clusters without samples get their lowest-row point at full weight.
    Returns (rows, weights, number of fallback clusters).
    """
    assign = inst.assignment
    cap = inst.cluster_weights()
    u = np.bincount(assign, weights=provisional, minlength=inst.n_anchors)
    w = np.zeros(len(assign))
    has = provisional > 0
    w[has] = provisional[has] * (cap[assign[has]] / u[assign[has]])
    fallbacks = 0
    for i, rows in enumerate(inst.clusters()):
        if len(rows) and u[i] == 0 and cap[i] > 0:
            w[rows.min()] = cap[i]
            fallbacks += 1
    rows = np.flatnonzero(w > 0)
    return rows, w[rows], fallbacks


def coreset1(X: RkInstance, params: Params, rng: np.random.Generator,
             policy: SampleSizePolicy = SampleSizePolicy(), eps: Optional[float] = None) -> Piece:
    """Uniform sample with replacement, reweighted to be capacity-respecting."""
    eps = params.eps if eps is None else eps
    n = len(X.data)
    if n == 0:
        return Piece(_empty(X.data), 0.0, stages=0)
    s = params.sample_override or sample_size(policy, params.k, params.dim, eps, params.m, params.z)
    counts = rng.multinomial(s, np.full(n, 1.0 / n))
    rows, w, fb = _capacity_rescale(X, counts * (n / s))
    delta = eps * n * X.radius ** params.z
    return Piece(X.data.take(rows, w), delta, {"coreset1": s}, fallbacks=fb)


def _inner_eps(eps: float, z: float) -> float:
    return eps / 3 if z == 1 else eps / (6 * z) ** z


def coreset_rk(X: RkInstance, params: Params, seed: int, key=(0,),
               policy: SampleSizePolicy = SampleSizePolicy()) -> Piece:
    """Size-bucketed uniform sampling for an (r,k)-instance.

    Small clusters are replaced by one representative each; every dyadic size
    bucket goes through :func:`coreset1` with a rescaled eps.
    """
    z = params.z
    n = len(X.data)
    if n == 0:
        return Piece(_empty(X.data), 0.0, stages=0)
    e = _inner_eps(params.eps, z)
    rz = X.radius ** z
    small, buckets = split_regular(X, e, z)
    parts, deltas, sizes = [], [], {}
    fallbacks = 0
    if small:
        rows = np.array([r for r, _ in small], dtype=np.int64)
        parts.append(X.data.take(rows, np.array([w for _, w in small])))
        deltas.append(2 * e * n * rz)
        sizes["small_clusters"] = 0
    for b, bucket in enumerate(buckets):
        piece = coreset1(bucket, params, stage_rng(seed, *key, b), policy, eps=e)
        parts.append(piece.coreset)
        deltas.append(piece.delta)
        sizes[f"bucket{b}"] = piece.sample_sizes["coreset1"]
        fallbacks += piece.fallbacks
    D, delta = merge([(p, dl) for p, dl in zip(parts, deltas)])
    if delta > params.eps * n * rz * (1 + 1e-9) + 1e-12:
        raise InvariantError("bucket budgets exceed eps * n * r^z")
    return Piece(D, delta, sizes, stages=len(parts), fallbacks=fallbacks)


def coreset2_delta(m: int, k: int, r: float, z: float, eps: float) -> float:
    if z == 1:
        return 8.0 * m * k * r
    return m * k * r ** z * (3 * z / eps) ** (z - 1) * 2 ** (z + 1)


def identity_oracle(X: WeightedPointSet, eps: float, rng=None) -> WeightedPointSet:
    return X


def coreset2(X: RkInstance, params: Params, vanilla_oracle: Optional[Callable] = None,
             rng: Optional[np.random.Generator] = None) -> Piece:
    """Outlier surrogates per cluster plus a vanilla coreset of the remainder."""
    oracle = identity_oracle if vanilla_oracle is None else vanilla_oracle
    m = params.m
    data = X.data
    if len(data) == 0:
        return Piece(_empty(data), 0.0, stages=0)
    held = np.zeros(len(data), dtype=bool)
    sur_rows, sur_w = [], []
    for rows in X.clusters():
        h = np.sort(rows)[:min(m, len(rows))]
        if len(h):
            held[h] = True
            sur_rows.append(int(h[0]))
            sur_w.append(float(data.weights[h].sum()))
    surrogates = data.take(np.array(sur_rows, dtype=np.int64), np.array(sur_w))
    rest = data.take(np.flatnonzero(~held))
    if len(rest):
        Dp = oracle(rest, params.eps, rng)
    else:
        Dp = rest
    D = WeightedPointSet.concat([surrogates, Dp])
    delta = coreset2_delta(m, X.n_anchors, X.radius, params.z, params.eps) if m else 0.0
    return Piece(D, delta, {"vanilla": len(Dp)})


def vanilla_oracle(X: WeightedPointSet, eps: float, target_size: int, z: float,
                   rng: np.random.Generator, metric: MetricSpace, k: int = 1) -> WeightedPointSet:
    """Empirical vanilla coreset: identity when small, else sensitivity-style sampling.

    Carries no proven guarantee. Output weight per seeded cluster equals the
    input weight of that cluster.
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    n = len(X)
    if n <= target_size:
        return X
    anchors = X.points[dz_seeding(X, min(k, n), 0, z, metric, rng)]
    d, assign = metric.nearest(X.points, anchors)
    c = dist_pow(d, z)
    w = X.weights
    mean = float(np.dot(w, c) / w.sum())
    score = w * (c + mean) if mean > 0 else w.copy()
    q = score / score.sum()
    counts = rng.multinomial(target_size, q)
    prov = np.zeros(n)
    hit = counts > 0
    prov[hit] = counts[hit] * w[hit] / (target_size * score[hit] / score.sum())
    inst = RkInstance(X, anchors, float(d.max()), assign)
    rows, wt, _ = _capacity_rescale(inst, prov)
    return X.take(rows, wt)


def make_vanilla_oracle(metric: MetricSpace, k: int, target_size: int, z: float) -> Callable:
    def oracle(X, eps, rng):
        return vanilla_oracle(X, eps, target_size, z, rng, metric, k)
    return oracle


def coreset3_delta(m: int, r: float, cost_xa: float, z: float, eps: float) -> float:
    if z == 1:
        return 6.0 * m * r + eps * cost_xa
    return 6.0 * (3 * z) ** (z - 1) * m * r ** z / eps ** (z - 1) + eps * cost_xa


def sampling_probabilities(X: RkInstance, z: float, metric: MetricSpace):
    """Importance-sampling distribution for the Euclidean construction.

    Returns (p, per-point cost, cluster costs, cluster sizes, k_eff, degenerate flag).
    """
    data = X.data
    n = len(data)
    A = X.anchors
    d = metric.pairwise(data.points, A)[np.arange(n), X.assignment]
    c = dist_pow(d, z)
    sizes = X.cluster_sizes().astype(np.float64)
    ccost = np.bincount(X.assignment, weights=c, minlength=X.n_anchors)
    k_eff = int(np.count_nonzero(sizes))
    total = float(c.sum())
    if total <= 0:
        return np.full(n, 1.0 / n), c, ccost, sizes, k_eff, True
    pi = X.assignment
    avg = ccost[pi] / sizes[pi]
    t1 = (c + avg) / total
    t2 = 1.0 / (k_eff * sizes[pi])
    pos = ccost[pi] > 0
    t3 = np.zeros(n)
    t3[pos] = c[pos] / (k_eff * ccost[pi][pos])
    p = (t1 + t2 + t3) / 4
    if np.all(ccost[sizes > 0] > 0):
        if abs(p.sum() - 1) > 1e-9:
            raise InvariantError(f"sampling probabilities sum to {p.sum()!r}")
    else:
        p = p / p.sum()
    return p, c, ccost, sizes, k_eff, False


def weight_caps(c, ccost, sizes, k_eff, pi, s) -> np.ndarray:
    total = float(c.sum())
    cs = ccost[pi]
    avg = cs / sizes[pi]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.stack([
            np.where(c > 0, total / c, np.inf),
            k_eff * sizes[pi],
            np.where(avg > 0, total / avg, np.inf),
            np.where(c > 0, k_eff * cs / c, np.inf),
        ])
    return 4.0 / s * terms.min(axis=0)


def coreset3(X: RkInstance, params: Params, rng: np.random.Generator, metric: MetricSpace,
             policy: SampleSizePolicy = SampleSizePolicy("euclidean")) -> Piece:
    """Importance sampling with per-cluster capacity rescaling (Euclidean instances)."""
    if metric.kind != "euclidean":
        raise ValueError("coreset3 requires the Euclidean backend")
    data = X.data
    n = len(data)
    if n == 0:
        return Piece(_empty(data), 0.0, stages=0)
    s = params.sample_override or sample_size(policy, params.k, params.dim, params.eps,
                                              params.m, params.z)
    p, c, ccost, sizes, k_eff, degenerate = sampling_probabilities(X, params.z, metric)
    counts = rng.multinomial(s, p)
    hit = counts > 0
    per_draw = np.zeros(n)
    per_draw[hit] = 1.0 / (s * p[hit])
    if not degenerate:
        caps = weight_caps(c, ccost, sizes, k_eff, X.assignment, s)
        bad = hit & (per_draw > caps * (1 + 1e-9))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InvariantError(f"sample weight {per_draw[i]!r} exceeds cap {caps[i]!r}")
    rows, w, fb = _capacity_rescale(X, counts * per_draw)
    delta = coreset3_delta(params.m, X.radius, float(c.sum()), params.z, params.eps)
    return Piece(data.take(rows, w), delta, {"coreset3": s}, fallbacks=fb)


def merge(coresets) -> tuple:
    """Union of coresets of disjoint datasets; budgets add."""
    coresets = list(coresets)
    parts = [c for c, _ in coresets]
    if not parts:
        raise ValueError("nothing to merge")
    ids = np.concatenate([p.ids for p in parts])
    if len(np.unique(ids)) != len(ids):
        raise ValueError("coresets share point identities; inputs must be disjoint")
    return WeightedPointSet.concat(parts), float(sum(d for _, d in coresets))


def _solve(X, params, metric, solver):
    n = len(X)
    if n <= params.k:
        C = X.points.copy()
        return C, float(trimmed_costs(np.zeros(n), X.weights, [min(params.m, X.total_weight)])[0])
    if callable(solver):
        return solver(X, params, metric)
    if solver == "exact":
        return exact_solver(X, params.k, params.m, params.z, metric)
    if solver == "heuristic":
        return heuristic_solver(X, params.k, params.m, params.z, metric, seed=params.seed)
    raise ValueError(f"unknown solver {solver!r}")


def build_metric(X: WeightedPointSet, params: Params, metric: MetricSpace,
                 solver="heuristic", vanilla: Optional[Callable] = None,
                 policy: Optional[SampleSizePolicy] = None) -> CoresetReport:
    """Far points verbatim, bucketed uniform sampling on rings, surrogate reduction inside."""
    policy = policy or SampleSizePolicy("metric")
    times = {}
    t0 = time.perf_counter()
    C_star, _ = _solve(X, params, metric, solver)
    times["solver"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    dec = decompose_metric_z(X, C_star, params, metric)
    times["decompose"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    pieces = [("far", Piece(dec.far, 0.0, stages=0))]
    for j, ring in enumerate(dec.rings):
        pieces.append((f"ring{j}", coreset_rk(ring, params, params.seed, key=(1, j), policy=policy)))
    times["rings"] = time.perf_counter() - t2

    t3 = time.perf_counter()
    if vanilla is None:
        vpol = SampleSizePolicy("metric", policy.c0, policy.polylog, policy.override)
        target = sample_size(vpol, params.k, params.dim, params.eps, 0, params.z)
        vanilla = make_vanilla_oracle(metric, params.k, target, params.z)
    else:
        target = None
    inner = coreset2(dec.inner, params, vanilla, stage_rng(params.seed, 2))
    if target is not None:
        inner.sample_sizes["vanilla"] = target
    pieces.append(("inner", inner))
    times["inner"] = time.perf_counter() - t3
    return _assemble(pieces, params, C_star, dec.robust_cost_star, times, t0,
                     flags=[] if dec.inner_bound_ok else ["inner_radius_above_target"],
                     extra={"rings": len(dec.rings), "T": dec.info.get("T"),
                            "inner_radius": dec.inner_radius})


def build_euclidean(X: WeightedPointSet, params: Params, metric: MetricSpace,
                    solver="heuristic", policy: Optional[SampleSizePolicy] = None) -> CoresetReport:
    """Far points verbatim plus importance sampling on the threshold-bounded rest."""
    if metric.kind != "euclidean":
        raise ValueError("build_euclidean requires the Euclidean backend")
    policy = policy or SampleSizePolicy("euclidean")
    times = {}
    t0 = time.perf_counter()
    C_star, _ = _solve(X, params, metric, solver)
    times["solver"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    F, G = decompose_euclidean(X, C_star, params, metric)
    times["decompose"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    piece = coreset3(G, params, stage_rng(params.seed, 3), metric, policy)
    times["inner"] = time.perf_counter() - t2
    cost_m = float(trimmed_costs(dist_pow(metric.nearest(X.points, C_star)[0], params.z),
                                 X.weights, [min(params.m, X.total_weight)])[0])
    if params.m and piece.delta > (7 + params.eps) * params.eps * cost_m * (1 + 1e-9) + 1e-9:
        raise InvariantError(f"inner budget {piece.delta!r} above (7+eps)*eps*cost^(m)")
    flags = [f"empty_sample_clusters={piece.fallbacks}"] if piece.fallbacks else []
    return _assemble([("far", Piece(F, 0.0, stages=0)), ("inner", piece)], params, C_star,
                     cost_m, times, t0, flags=flags, extra={"inner_radius": G.radius})


def _assemble(pieces, params, C_star, cost_star, times, t0, flags, extra) -> CoresetReport:
    D, delta = merge([(p.coreset, p.delta) for _, p in pieces])
    stage_sizes = {name: len(p.coreset) for name, p in pieces}
    stage_sizes["total"] = len(D)
    stage_sizes["stages"] = int(sum(p.stages for _, p in pieces))
    samples = {f"{name}/{k}": v for name, p in pieces for k, v in p.sample_sizes.items()}
    ledger = {name: p.delta for name, p in pieces}
    ledger["total"] = delta
    ledger["cost_star"] = cost_star
    ledger["relative"] = delta / cost_star if cost_star > 0 else (0.0 if delta == 0 else math.inf)
    fallbacks = sum(p.fallbacks for _, p in pieces)
    if fallbacks and not any(f.startswith("empty_sample") for f in flags):
        flags = flags + [f"empty_sample_clusters={fallbacks}"]
    times["total"] = time.perf_counter() - t0
    ledger["info"] = {k: v for k, v in extra.items() if v is not None}
    return CoresetReport(D, delta, stage_sizes, samples, params.seed, times, ledger,
                         centers_star=np.asarray(C_star), robust_cost_star=cost_star, flags=flags)
