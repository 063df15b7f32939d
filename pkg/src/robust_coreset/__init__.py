"""Small weighted coresets for robust (k,z)-clustering with outliers."""

from .core import (CoresetReport, Decomposition, EuclideanMetric, ExplicitMetric, MetricSpace,
                   Params, RegularInstance, RkInstance, WeightedPointSet, make_rk_instance)
from .coreset import (SampleSizePolicy, build_euclidean, build_metric, coreset1, coreset2,
                      coreset3, coreset_rk, merge, sample_size, vanilla_oracle)
from .cost import (distortion, robust_cost, robust_cost_oracle, robust_cost_value,
                   vanilla_cost)
from .decompose import decompose_euclidean, decompose_metric, decompose_metric_z, split_regular
from .solver import exact_solver, heuristic_solver
from .verify import (certify_robust_coreset, check_capacity, check_indexed_subset,
                     check_range_space)

__version__ = "0.1.0"
