"""Vanilla and robust (k,z)-clustering costs on weighted sets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import MetricSpace, WeightedPointSet, as_centers, dist_pow

ORACLE_MAX_POINTS = 12


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class OutlierRemoval:
    removed: list  # (row index, removed weight), in removal order
    retained_cost: float


def point_costs(Y: WeightedPointSet, C, z: float, metric: MetricSpace) -> np.ndarray:
    if len(Y) == 0:
        return np.zeros(0)
    d, _ = metric.nearest(Y.points, as_centers(metric, C))
    return dist_pow(d, z)


def vanilla_cost(Y: WeightedPointSet, C, z: float, metric: MetricSpace) -> float:
    if len(Y) == 0:
        return 0.0
    return float(np.dot(Y.weights, point_costs(Y, C, z, metric)))


def _check_budget(total: float, t: float):
    if t < 0:
        raise ValueError("outlier budget must be nonnegative")
    if t > total + 1e-9 * max(1.0, total):
        raise BudgetError("outlier budget exceeds total weight")


def robust_cost(Y: WeightedPointSet, C, t: float, z: float, metric: MetricSpace):
    """Cost after removing weight ``t`` from the farthest points.

    Removal is greedy by decreasing cost (ties: lower row first) and splits the
    boundary point. Returns ``(cost, OutlierRemoval)``.
    """
    c = point_costs(Y, C, z, metric)
    w = Y.weights
    _check_budget(float(w.sum()), t)
    order = np.argsort(-c, kind="stable")
    remaining = float(t)
    removed_w = np.zeros_like(w)
    removed = []
    for i in order:
        if remaining <= 0:
            break
        if w[i] == 0:
            continue
        take = min(w[i], remaining)
        removed_w[i] = take
        removed.append((int(i), float(take)))
        remaining -= take
    cost = float(np.dot(w - removed_w, c))
    return cost, OutlierRemoval(removed, cost)


def trimmed_costs(c: np.ndarray, w: np.ndarray, ts) -> np.ndarray:
    """Robust cost for each budget in ``ts`` given per-point costs and weights.

    Only the heaviest-cost tail that can be removed is sorted, so this stays
    O(n) for small budgets.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    total = float(np.dot(w, c))
    tmax = float(ts.max()) if len(ts) else 0.0
    if tmax <= 0 or len(c) == 0:
        return np.full(len(ts), total)
    pos = w > 0
    if not pos.all():
        c, w = c[pos], w[pos]
    n = len(c)
    wmin = float(w.min())
    q = min(n, int(math.ceil(tmax / wmin)) + 1)
    if q < n:
        top = np.argpartition(-c, q - 1)[:q]
        top = top[np.argsort(-c[top], kind="stable")]
    else:
        top = np.argsort(-c, kind="stable")
    tc, tw = c[top], w[top]
    cum_w = np.concatenate([[0.0], np.cumsum(tw)])
    cum_cw = np.concatenate([[0.0], np.cumsum(tw * tc)])
    out = np.empty(len(ts))
    for j, t in enumerate(ts):
        if t <= 0:
            out[j] = total
            continue
        # number of points fully removed
        p = int(np.searchsorted(cum_w, t, side="right")) - 1
        p = min(p, len(tc))
        rem = cum_cw[p]
        if p < len(tc):
            rem += (t - cum_w[p]) * tc[p]
        out[j] = max(total - rem, 0.0)
    return out


def robust_cost_value(Y: WeightedPointSet, C, t: float, z: float, metric: MetricSpace) -> float:
    _check_budget(Y.total_weight, t)
    return float(trimmed_costs(point_costs(Y, C, z, metric), Y.weights, [t])[0])


def robust_cost_oracle(Y: WeightedPointSet, C, t: float, z: float, metric: MetricSpace,
                       granularity: int = 100) -> float:
    """Exhaustive minimum over "whole points plus one fractional point" removals."""
    n = len(Y)
    if n > ORACLE_MAX_POINTS:
        raise BudgetError(f"oracle limited to {ORACLE_MAX_POINTS} points, got {n}")
    if granularity > 100 or abs(t * granularity - round(t * granularity)) > 1e-9:
        raise ValueError("t must lie on a grid of step 1/granularity with granularity <= 100")
    w = Y.weights
    _check_budget(float(w.sum()), t)
    c = point_costs(Y, C, z, metric)
    total = float(np.dot(w, c))
    if n == 0:
        return 0.0
    tol = 1e-9 * max(1.0, float(w.sum()))
    masks = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    ws = masks @ w
    cs = masks @ (w * c)
    best = math.inf
    exact = np.abs(ws - t) <= tol
    if exact.any():
        best = float((total - cs)[exact].min())
    for j in range(n):
        frac = t - ws
        ok = ~masks[:, j] & (frac > tol) & (frac <= w[j] + tol)
        if ok.any():
            best = min(best, float((total - cs - frac * c[j])[ok].min()))
    return max(best, 0.0)


def robust_cost_grid(Y: WeightedPointSet, C, t: float, z: float, metric: MetricSpace,
                     step: float) -> float:
    """Brute force over every per-point removal on a ``step`` grid (tiny inputs only)."""
    n = len(Y)
    if n > 6:
        raise BudgetError("grid oracle limited to 6 points")
    w = Y.weights
    c = point_costs(Y, C, z, metric)
    total = float(np.dot(w, c))
    levels = [np.arange(0, math.floor(wi / step + 1e-9) + 1) * step for wi in w]
    best = math.inf
    for combo in itertools.product(*levels):
        r = np.asarray(combo)
        if abs(r.sum() - t) <= 1e-9:
            best = min(best, total - float(np.dot(r, c)))
    if best == math.inf:
        raise ValueError("no removal pattern on the grid reaches the budget")
    return max(best, 0.0)


def robust_cost_integral(Y: WeightedPointSet, C, t: float, metric: MetricSpace) -> float:
    """z = 1 robust cost as the exact integral of (weight outside B(C,u) - t)^+ du."""
    if len(Y) == 0:
        return 0.0
    d, _ = metric.nearest(Y.points, as_centers(metric, C))
    order = np.argsort(d)
    d, w = d[order], Y.weights[order]
    # weight strictly outside B(C,u) is constant on [d_(i-1), d_(i))
    outside = w.sum() - np.concatenate([[0.0], np.cumsum(w)[:-1]])
    lefts = np.concatenate([[0.0], d[:-1]])
    lengths = d - lefts
    return float(np.sum(lengths * np.maximum(outside - t, 0.0)))


@dataclass
class DistortionReport:
    max_rel: float
    max_add: float
    pass_rate: float
    witness: dict
    errors: np.ndarray  # |cost^t(X,C) - cost^t(D,C)| per (C, t)
    base: np.ndarray  # cost^t(X,C) per (C, t)

    def as_dict(self) -> dict:
        return {"max_rel": self.max_rel, "max_add": self.max_add,
                "pass_rate": self.pass_rate, "witness": self.witness}


def robust_profiles(Y: WeightedPointSet, centers, m: int, z: float, metric: MetricSpace) -> np.ndarray:
    """Matrix of cost^t(Y, C) for every center set (rows) and integer t in 0..m."""
    ts = np.arange(m + 1, dtype=np.float64)
    out = np.empty((len(centers), m + 1))
    for i, C in enumerate(centers):
        out[i] = trimmed_costs(point_costs(Y, C, z, metric), Y.weights, ts)
    return out


def distortion(X: WeightedPointSet, D: WeightedPointSet, m: int, z: float, metric: MetricSpace,
               centers, eps: float = 0.0, delta: float = 0.0) -> DistortionReport:
    """Compare robust costs of X and D on every center set and every t = 0..m.

    ``max_add`` is the largest excess of |error| over ``eps * cost + delta``
    (nonpositive when every pair satisfies the bound).
    """
    centers = list(centers)
    if not centers:
        raise ValueError("need at least one center set")
    if m > min(X.total_weight, D.total_weight) + 1e-9:
        raise BudgetError("outlier budget exceeds total weight")
    base = robust_profiles(X, centers, m, z, metric)
    other = robust_profiles(D, centers, m, z, metric)
    err = np.abs(base - other)
    excess = err - eps * base - delta
    tol = 1e-9 * np.maximum(1.0, base)
    passed = excess <= tol
    rel = np.where(base > 1e-12, err / np.where(base > 1e-12, base, 1.0), 0.0)
    ci, ti = np.unravel_index(int(np.argmax(excess)), excess.shape)
    witness = {"center_index": int(ci), "t": int(ti), "error": float(err[ci, ti]),
               "cost_x": float(base[ci, ti]), "cost_d": float(other[ci, ti])}
    return DistortionReport(float(rel.max()), float(excess.max()), float(passed.mean()),
                            witness, err, base)
