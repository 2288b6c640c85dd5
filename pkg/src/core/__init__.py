"""
多変量正規分布の基本演算パッケージ
"""

from .errors import (
    CicSamplerError,
    ConfigurationError,
    DegenerateComponent,
    DimensionMismatch,
    EmptyRange,
    GridExhausted,
    InsufficientPoints,
    InvalidLogDensity,
    NoEffectiveSamples,
    NotPositiveDefinite,
    RepetitionFailure,
    TooManyAbortsError,
)
from .linalg import SpdMatrix, cholesky, condition_number, scaled_identity
from .gaussian import mvn_logpdf, mvn_sample, std_normal_cdf, std_normal_logpdf

__all__ = [
    "CicSamplerError",
    "ConfigurationError",
    "DegenerateComponent",
    "DimensionMismatch",
    "EmptyRange",
    "GridExhausted",
    "InsufficientPoints",
    "InvalidLogDensity",
    "NoEffectiveSamples",
    "NotPositiveDefinite",
    "RepetitionFailure",
    "TooManyAbortsError",
    "SpdMatrix",
    "cholesky",
    "condition_number",
    "scaled_identity",
    "mvn_logpdf",
    "mvn_sample",
    "std_normal_cdf",
    "std_normal_logpdf",
]
