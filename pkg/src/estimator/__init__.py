"""
重み付きサンプルの保持と推定量パッケージ
"""

from .batch_store import Batch, BatchStore, WeightedPoint, importance_weights
from .cross_entropy import (
    cross_entropy_estimate,
    cross_entropy_from_arrays,
    effective_support,
    rho_estimate_batch,
    rho_estimate_cumulative,
    rho_estimate_range,
)

__all__ = [
    "Batch",
    "BatchStore",
    "WeightedPoint",
    "importance_weights",
    "cross_entropy_estimate",
    "cross_entropy_from_arrays",
    "effective_support",
    "rho_estimate_batch",
    "rho_estimate_cumulative",
    "rho_estimate_range",
]
