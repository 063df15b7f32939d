"""Baseline robust (k,z)-clustering solutions used to drive the decompositions."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import MetricSpace, WeightedPointSet, dist_pow
from .cost import BudgetError, trimmed_costs

EXACT_BUDGET = 2_000_000
RESTARTS = 3


def exact_solver(X: WeightedPointSet, k: int, m: float, z: float, metric: MetricSpace,
                 candidate_pool=None):
    """Best k-subset of the candidate pool (data points by default) by exhaustive search."""
    pool = X.points if candidate_pool is None else metric.as_points(candidate_pool)
    n_pool = len(pool)
    if n_pool == 0:
        raise ValueError("empty candidate pool")
    k_eff = min(k, n_pool)
    if math.comb(n_pool, k_eff) > EXACT_BUDGET:
        raise BudgetError(
            f"C({n_pool},{k_eff}) center sets exceed the exhaustive budget; use heuristic_solver")
    pc = dist_pow(metric.pairwise(pool, X.points), z)  # pool x n
    best, best_combo = math.inf, None
    for combo in itertools.combinations(range(n_pool), k_eff):
        c = pc[list(combo)].min(axis=0)
        val = float(trimmed_costs(c, X.weights, [m])[0])
        if val < best - 1e-12 * max(1.0, abs(best) if best < math.inf else 1.0):
            best, best_combo = val, combo
    return pool[list(best_combo)], best


class _SwapState:
    """Nearest / second-nearest bookkeeping so one swap evaluation is O(n)."""

    def __init__(self, X: WeightedPointSet, centers_idx, m, z, metric):
        self.X, self.m, self.z, self.metric = X, m, z, metric
        self.idx = list(centers_idx)
        self.dc = dist_pow(metric.pairwise(X.points, X.points[self.idx]), z)  # n x k
        self._refresh()

    def _refresh(self):
        dc = self.dc
        if dc.shape[1] == 1:
            self.best = dc[:, 0]
            self.arg = np.zeros(len(dc), dtype=np.int64)
            self.second = np.full(len(dc), np.inf)
        else:
            part = np.argpartition(dc, 1, axis=1)[:, :2]
            rows = np.arange(len(dc))
            a, b = dc[rows, part[:, 0]], dc[rows, part[:, 1]]
            swap = a > b
            self.arg = np.where(swap, part[:, 1], part[:, 0])
            self.best = np.minimum(a, b)
            self.second = np.maximum(a, b)
        self.cost = float(trimmed_costs(self.best, self.X.weights, [self.m])[0])

    def swap_cost(self, j: int, cand_cost: np.ndarray) -> float:
        without = np.where(self.arg == j, self.second, self.best)
        return float(trimmed_costs(np.minimum(without, cand_cost), self.X.weights, [self.m])[0])

    def apply(self, j: int, cand: int, cand_cost: np.ndarray):
        self.idx[j] = cand
        self.dc[:, j] = cand_cost
        self._refresh()


def dz_seeding(X: WeightedPointSet, k: int, m: float, z: float, metric, rng) -> list:
    """Outlier-aware D^z seeding: the m currently farthest points get no mass."""
    n = len(X)
    w = X.weights
    first = int(rng.choice(n, p=w / w.sum())) if w.sum() > 0 else int(rng.integers(n))
    chosen = [first]
    cur = dist_pow(metric.pairwise(X.points, X.points[[first]])[:, 0], z)
    while len(chosen) < k:
        score = w * cur
        n_ignore = int(math.ceil(m))
        if 0 < n_ignore < n:
            far = np.argpartition(-cur, n_ignore - 1)[:n_ignore]
            score = score.copy()
            score[far] = 0.0
        if score.sum() <= 0:
            score = w * cur
        if score.sum() <= 0:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        else:
            nxt = int(rng.choice(n, p=score / score.sum()))
        chosen.append(nxt)
        cur = np.minimum(cur, dist_pow(metric.pairwise(X.points, X.points[[nxt]])[:, 0], z))
    return chosen


def heuristic_solver(X: WeightedPointSet, k: int, m: float, z: float, metric: MetricSpace,
                     seed: int = 0, rounds: int = 8, max_iter: int = 30):
    """D^z seeding plus single-swap local search on the robust objective.

    Each local-search step samples ``rounds`` candidate points and applies the
    best improving swap; stops when none improves. Best of three restarts.
    """
    n = len(X)
    if k > n:
        raise ValueError("k exceeds the number of points")
    if k == n:
        centers = X.points.copy()
        return centers, float(trimmed_costs(np.zeros(n), X.weights, [m])[0])
    results = []
    for restart in range(RESTARTS):
        rng = np.random.default_rng([seed, restart])
        state = _SwapState(X, dz_seeding(X, k, m, z, metric, rng), m, z, metric)
        for _ in range(max_iter):
            cands = rng.choice(n, size=min(rounds, n), replace=False)
            best_gain, best_move = 0.0, None
            for cand in cands:
                if cand in state.idx:
                    continue
                cc = dist_pow(metric.pairwise(X.points, X.points[[cand]])[:, 0], z)
                for j in range(k):
                    gain = state.cost - state.swap_cost(j, cc)
                    if gain > best_gain + 1e-12 * max(1.0, state.cost):
                        best_gain, best_move = gain, (j, int(cand), cc)
            if best_move is None:
                break
            state.apply(*best_move)
        results.append((state.cost, restart, list(state.idx)))
    cost, _, idx = min(results, key=lambda r: (r[0], r[1]))
    return X.points[idx], cost
