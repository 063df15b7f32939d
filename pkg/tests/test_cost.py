import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_coreset import EuclideanMetric, WeightedPointSet
from robust_coreset.cost import (BudgetError, distortion, robust_cost, robust_cost_grid,
                                 robust_cost_integral, robust_cost_oracle, robust_cost_value,
                                 trimmed_costs, vanilla_cost)
from conftest import line

M1 = EuclideanMetric(1)


def test_vanilla_examples():
    assert vanilla_cost(line([0, 3]), [[0.0]], 1, M1) == 3.0
    assert vanilla_cost(line([0, 3]), [[0.0]], 2, M1) == 9.0
    assert vanilla_cost(line([]), [[0.0]], 1, M1) == 0.0


@pytest.mark.parametrize("pts, w, t, expected", [
    ([0, 5], [1, 2], 1.0, 5.0),
    ([1, 2, 3], None, 1.5, 2.0),
    ([1, 2, 3], None, 0.0, 6.0),
    ([1, 2, 3], None, 3.0, 0.0),
])
def test_robust_examples(pts, w, t, expected):
    Y = line(pts, w)
    cost, removal = robust_cost(Y, [[0.0]], t, 1, M1)
    assert cost == pytest.approx(expected, abs=1e-12)
    assert sum(r for _, r in removal.removed) == pytest.approx(t)
    assert robust_cost_grid(Y, [[0.0]], t, 1, M1, 0.5) == pytest.approx(expected)
    assert robust_cost_value(Y, [[0.0]], t, 1, M1) == pytest.approx(expected)


def test_removal_order_ties_lower_row_first():
    _, rem = robust_cost(line([2, 2, 1]), [[0.0]], 1.5, 1, M1)
    assert rem.removed == [(0, 1.0), (1, 0.5)]


def test_budget_errors():
    with pytest.raises(BudgetError, match="exceeds total weight"):
        robust_cost(line([1, 2]), [[0.0]], 3, 1, M1)
    with pytest.raises(ValueError):
        robust_cost(line([1, 2]), [[0.0]], -1, 1, M1)
    with pytest.raises(BudgetError):
        robust_cost_oracle(line(range(13)), [[0.0]], 1, 1, M1)


def _instance(rng, n, z):
    pts = rng.normal(size=(n, 2)) * rng.uniform(0.1, 5)
    w = rng.integers(1, 13, size=n) / 4.0
    return WeightedPointSet(pts, w, np.arange(n)), rng.normal(size=(rng.integers(1, 3), 2))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.sampled_from([1.0, 1.5, 2.0]), st.integers(0, 2 ** 31), st.data())
def test_greedy_matches_oracle(n, z, seed, data):
    rng = np.random.default_rng(seed)
    Y, C = _instance(rng, n, z)
    steps = int(round(Y.total_weight * 4))
    t = data.draw(st.integers(0, steps)) / 4
    metric = EuclideanMetric(2)
    got = robust_cost_value(Y, C, t, z, metric)
    want = robust_cost_oracle(Y, C, t, z, metric, granularity=4)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2 ** 31), st.floats(0, 1))
def test_integral_identity(n, seed, frac):
    rng = np.random.default_rng(seed)
    Y, C = _instance(rng, n, 1)
    t = frac * Y.total_weight
    metric = EuclideanMetric(2)
    assert robust_cost_value(Y, C, t, 1, metric) == pytest.approx(
        robust_cost_integral(Y, C, t, metric), rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2 ** 31), st.sampled_from([1.0, 2.0, 3.0]))
def test_monotone_and_scale_covariant(n, seed, z):
    rng = np.random.default_rng(seed)
    Y, C = _instance(rng, n, z)
    metric = EuclideanMetric(2)
    ts = np.linspace(0, Y.total_weight, 7)
    vals = [robust_cost_value(Y, C, t, z, metric) for t in ts]
    assert all(a >= b - 1e-9 * max(1, a) for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(0, abs=1e-9)
    assert vals[0] == pytest.approx(vanilla_cost(Y, C, z, metric), rel=1e-12)
    lam = 3.0
    Ys = WeightedPointSet(Y.points * lam, Y.weights, Y.ids)
    for t, v in zip(ts, vals):
        assert robust_cost_value(Ys, C * lam, t, z, metric) == pytest.approx(
            lam ** z * v, rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2 ** 31))
def test_trimmed_costs_matches_full_sort(n, seed):
    rng = np.random.default_rng(seed)
    c = rng.integers(0, 5, size=n).astype(float)  # many ties
    w = rng.integers(0, 4, size=n) / 2.0
    ts = rng.uniform(0, w.sum(), size=4)
    order = np.argsort(-c, kind="stable")
    for t, got in zip(ts, trimmed_costs(c, w, ts)):
        left, total = t, float(np.dot(w, c))
        for i in order:
            take = min(w[i], left)
            total -= take * c[i]
            left -= take
        assert got == pytest.approx(max(total, 0), abs=1e-9)


def test_distortion_self_and_single_point():
    rng = np.random.default_rng(0)
    X = WeightedPointSet.unweighted(rng.normal(size=(30, 2)))
    metric = EuclideanMetric(2)
    centers = [rng.normal(size=(2, 2)) for _ in range(10)]
    rep = distortion(X, X, 3, 1, metric, centers)
    assert rep.max_rel == 0 and rep.pass_rate == 1.0
    D = WeightedPointSet(X.points[:1], [30.0], [0])
    bad = distortion(X, D, 3, 1, metric, centers, eps=0.1)
    assert bad.pass_rate < 1 and bad.max_add > 0
    assert math.isfinite(bad.witness["error"])
