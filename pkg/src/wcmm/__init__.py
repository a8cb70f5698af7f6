"""Weighted block CR matrix multiplication and straggler-robust coded schemes."""

from .matrix import (
    BlockPartition,
    DimensionError,
    as_matrix,
    block_outer_sum,
    frobenius_norm,
    load_matrix,
    matmul,
    partition,
    save_matrix,
)
from .sampling import (
    SamplingDistribution,
    SamplingPlan,
    SketchPair,
    build_unweighted_sketch,
    build_weighted_sketch,
    compute_distribution,
    draw_fixed,
    draw_until_distinct,
    estimate_product,
    exact_plan,
    select_stream,
    variance_functional,
)

__version__ = "0.1.0"
