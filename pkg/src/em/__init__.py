"""
重み付きEMアルゴリズムパッケージ
"""

from .weighted_em import (
    EmConfig,
    EmOutcome,
    EmStatus,
    TooManyAborts,
    em_fit,
    em_fit_multistart,
    em_sweep,
    initialize_params,
    responsibilities,
)

__all__ = [
    "EmConfig",
    "EmOutcome",
    "EmStatus",
    "TooManyAborts",
    "em_fit",
    "em_fit_multistart",
    "em_sweep",
    "initialize_params",
    "responsibilities",
]
