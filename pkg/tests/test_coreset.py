import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_coreset import (EuclideanMetric, Params, SampleSizePolicy, WeightedPointSet,
                            build_euclidean, build_metric, coreset1, coreset2, coreset3,
                            coreset_rk, make_rk_instance, merge, sample_size, vanilla_oracle)
from robust_coreset.coreset import (InvariantError, _capacity_rescale, sampling_probabilities,
                                    stage_rng)
from robust_coreset.cost import distortion, vanilla_cost
from robust_coreset.verify import check_capacity, random_centers
from conftest import line

M1 = EuclideanMetric(1)
M2 = EuclideanMetric(2)


def test_sample_size_examples():
    assert sample_size(SampleSizePolicy("metric", polylog=0), 2, 1, 0.5, 0, 1) == 8
    for z in (1, 1.5, 2, 3):
        assert sample_size(SampleSizePolicy("euclidean", polylog=0), 1, 1, 0.2, 0, z) == 25
    assert sample_size(SampleSizePolicy(override=500), 3, 1, 0.1, 5) == 500
    with pytest.raises(ValueError):
        SampleSizePolicy("other")


def test_sample_size_grows_with_m_and_shrinks_with_eps():
    pol = SampleSizePolicy()
    assert sample_size(pol, 2, 1, 0.5, 10) > sample_size(pol, 2, 1, 0.5, 0)
    assert sample_size(pol, 2, 1, 0.1, 0) > sample_size(pol, 2, 1, 0.5, 0)


def _two_clusters(rng, n=40):
    pts = np.concatenate([rng.normal(0, 1, n // 2), rng.normal(20, 1, n - n // 2)])
    return make_rk_instance(line(pts), [[0.0], [20.0]], M1)


def test_capacity_rescale_algebra():
    # cluster 0 has 4 points, n = 8, s = 4; three samples in cluster 0
    inst = make_rk_instance(line([0, 0, 0, 0, 9, 9, 9, 9]), [[0.0], [9.0]], M1)
    prov = np.array([2, 2, 2, 0, 2, 0, 0, 0], dtype=float)
    rows, w, fb = _capacity_rescale(inst, prov)
    assert rows.tolist() == [0, 1, 2, 4] and fb == 0
    assert w[:3] == pytest.approx([4 / 3] * 3)
    assert w[3] == 4


def test_capacity_rescale_fallback():
    inst = make_rk_instance(line([0, 0, 9, 9]), [[0.0], [9.0]], M1)
    rows, w, fb = _capacity_rescale(inst, np.array([1.0, 0, 0, 0]))
    assert rows.tolist() == [0, 2] and w.tolist() == [2.0, 2.0] and fb == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 200))
def test_coreset1_capacity(seed, s):
    rng = np.random.default_rng(seed)
    inst = _two_clusters(rng)
    piece = coreset1(inst, Params(2, 1, 0.5, sample_override=s), rng)
    assert check_capacity(inst, piece.coreset) <= 1e-9
    assert piece.coreset.total_weight == pytest.approx(40, abs=1e-9)
    assert len(piece.coreset) <= s + 2
    assert piece.delta == pytest.approx(0.5 * 40 * inst.radius)


def test_coreset_rk_zero_radius_exact():
    inst = make_rk_instance(line([0, 0, 0, 5, 5]), [[0.0], [5.0]], M1)
    piece = coreset_rk(inst, Params(2, 1, 0.5), seed=0)
    assert piece.delta == 0
    rep = distortion(inst.data, piece.coreset, 1, 1, M1, [[[1.0]], [[4.0], [-2.0]]])
    assert rep.max_rel == pytest.approx(0, abs=1e-12)


def test_coreset_rk_single_cluster_and_budget():
    rng = np.random.default_rng(3)
    inst = make_rk_instance(line(rng.normal(size=50)), [[0.0]], M1)
    piece = coreset_rk(inst, Params(1, 2, 0.3, sample_override=30), seed=1)
    assert check_capacity(inst, piece.coreset) <= 1e-9
    assert piece.delta <= 0.3 * 50 * inst.radius * (1 + 1e-9)


def test_coreset2_degenerate_branches():
    inst = make_rk_instance(line([0, 1, 2, 10, 11]), [[1.0], [10.0]], M1)
    piece = coreset2(inst, Params(2, 5, 0.5))
    assert sorted(piece.coreset.weights.tolist()) == [2.0, 3.0] and len(piece.coreset) == 2
    piece0 = coreset2(inst, Params(2, 0, 0.5))
    assert piece0.coreset.ids.tolist() == [0, 1, 2, 3, 4] and piece0.delta == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 4), st.integers(1, 3))
def test_coreset2_identity_oracle_bound(seed, m, k):
    rng = np.random.default_rng(seed)
    X = WeightedPointSet.unweighted(rng.normal(size=(60, 1)) * 5)
    A = rng.normal(size=(k, 1)) * 5
    inst = make_rk_instance(X, A, M1)
    piece = coreset2(inst, Params(k, m, 0.5))
    assert piece.coreset.total_weight == pytest.approx(60)
    assert piece.delta == pytest.approx(8 * m * inst.n_anchors * inst.radius)
    centers = [rng.normal(size=(rng.integers(1, 4), 1)) * 5 for _ in range(200)]
    rep = distortion(X, piece.coreset, m, 1, M1, centers, eps=0.0, delta=piece.delta)
    assert rep.pass_rate == 1.0


def test_coreset3_probability_example():
    inst = make_rk_instance(line([0, 2]), [[1.0]], M1)
    p, *_ = sampling_probabilities(inst, 1, M1)
    assert p.tolist() == [0.5, 0.5]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 4), st.sampled_from([1.0, 2.0]))
def test_coreset3_probabilities_and_capacity(seed, k, z):
    rng = np.random.default_rng(seed)
    X = WeightedPointSet.unweighted(rng.normal(size=(80, 2)) * 3)
    inst = make_rk_instance(X, rng.normal(size=(k, 2)) * 3, M2)
    p, *_ = sampling_probabilities(inst, z, M2)
    assert p.sum() == pytest.approx(1, abs=1e-9) and (p > 0).all()
    piece = coreset3(inst, Params(k, 2, 0.3, z=z, sample_override=40), rng, M2)
    assert check_capacity(inst, piece.coreset) <= 1e-9
    assert len(piece.coreset) <= 40 + k


def test_coreset3_degenerate_uniform():
    inst = make_rk_instance(line([1, 1, 1]), [[1.0]], M1)
    p, *_, degenerate = sampling_probabilities(inst, 1, M1)
    assert degenerate and p.tolist() == pytest.approx([1 / 3] * 3)


def test_coreset3_needs_euclidean():
    from robust_coreset import ExplicitMetric
    em = ExplicitMetric(np.array([[0, 1.0], [1.0, 0]]))
    inst = make_rk_instance(WeightedPointSet.unweighted(np.arange(2)), [0], em)
    with pytest.raises(ValueError):
        coreset3(inst, Params(1, 0, 0.5), np.random.default_rng(0), em)


def test_merge():
    a = line([1, 2])
    b = WeightedPointSet(np.array([[3.0]]), [1.0], [7])
    D, d = merge([(a, 0.0), (a.take(np.zeros(0, dtype=np.int64)), 0.0)])
    assert len(D) == 2 and d == 0
    c = WeightedPointSet(np.array([[4.0]]), [1.0], [8])
    _, d3 = merge([(a, 1.0), (b, 2.5), (c, 0.5)])
    assert d3 == 4.0
    with pytest.raises(ValueError, match="disjoint"):
        merge([(a, 0.0), (a, 0.0)])


def test_vanilla_oracle_identity_and_weight():
    rng = np.random.default_rng(0)
    X = WeightedPointSet.unweighted(rng.normal(size=(100, 2)))
    assert vanilla_oracle(X, 0.2, 100, 1, rng, M2) is X
    D = vanilla_oracle(X, 0.2, 30, 1, rng, M2, k=3)
    assert D.total_weight == pytest.approx(100) and len(D) <= 33


def test_vanilla_oracle_empirical_distortion():
    good = 0
    k, eps = 3, 0.2
    for trial in range(20):
        rng = np.random.default_rng(trial)
        centers = rng.uniform(-5, 5, size=(k, 2))
        X = WeightedPointSet.unweighted(centers[rng.integers(k, size=2000)]
                                        + rng.normal(scale=0.5, size=(2000, 2)))
        D = vanilla_oracle(X, eps, int(50 * k / eps ** 2), 1, stage_rng(trial, 9), M2, k=k)
        Cs = random_centers(X, k, 500, rng)
        errs = [abs(vanilla_cost(D, C, 1, M2) / vanilla_cost(X, C, 1, M2) - 1) for C in Cs]
        good += max(errs) <= 2 * eps
    assert good >= 18


def _workload(seed, n=400):
    from robust_coreset.io import generate
    return WeightedPointSet.unweighted(generate("clustered_with_outliers", n, 2, 3, 5, 1.0, seed))


def test_build_metric_small_input_exact():
    X = line([1, 2, 3])
    rep = build_metric(X, Params(1, 1, 0.5), M1)
    assert len(rep.coreset) == 3 and rep.additive_budget == 0


def test_build_metric_singletons():
    X = line([0, 100, 200, 300, 400, 500])
    rep = build_metric(X, Params(6, 0, 0.5), M1)
    assert rep.coreset.total_weight == 6 and len(rep.coreset) == 6


@pytest.mark.parametrize("builder", ["metric", "euclidean"])
def test_builders_deterministic_and_ledgered(builder):
    X = _workload(1)
    params = Params(3, 5, 0.2, dim=3, seed=4)
    fn = build_metric if builder == "metric" else build_euclidean
    r1, r2 = fn(X, params, M2), fn(X, params, M2)
    assert np.array_equal(r1.coreset.points, r2.coreset.points)
    assert np.array_equal(r1.coreset.weights, r2.coreset.weights)
    assert r1.coreset.total_weight == pytest.approx(len(X))
    assert r1.stage_sizes["total"] == len(r1.coreset)
    assert r1.delta_ledger["total"] == pytest.approx(r1.additive_budget)
    assert sum(v for k, v in r1.stage_sizes.items() if k not in ("total", "stages")) == len(r1.coreset)


def test_build_euclidean_m0_and_all_far():
    X = _workload(2, 200)
    rep = build_euclidean(X, Params(3, 0, 0.2, sample_override=50), M2)
    assert rep.stage_sizes["far"] == 0
    tiny = line([0, 100])
    rep = build_euclidean(tiny, Params(1, 1, 0.5), M1)
    assert rep.coreset.total_weight == 2
