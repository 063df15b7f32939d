import numpy as np
import pytest

from robust_coreset import EuclideanMetric, WeightedPointSet


def line(values, weights=None):
    pts = np.asarray(values, dtype=float).reshape(-1, 1)
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    return WeightedPointSet(pts, w, np.arange(len(pts)))


@pytest.fixture
def line_metric():
    return EuclideanMetric(1)


@pytest.fixture
def plane():
    return EuclideanMetric(2)
