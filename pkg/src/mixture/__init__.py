"""
ガウス混合モデルパッケージ
"""

from .gmm import (
    GmmParams,
    component_logpdfs,
    free_param_dimension,
    gmm_logpdf,
    gmm_sample,
    load_params,
    save_params,
)

__all__ = [
    "GmmParams",
    "component_logpdfs",
    "free_param_dimension",
    "gmm_logpdf",
    "gmm_sample",
    "load_params",
    "save_params",
]
