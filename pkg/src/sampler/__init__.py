"""
ρの推定手法パッケージ
"""

from .sampler_interface import SamplerInterface
from .problem import Problem, default_batch_sizes, default_initial_proposal, draw_batch
from .cic_sampler import CicImportanceSampler, PipelineConfig, PipelineResult, run_cic_is
from .ce_ais_gm_sampler import CeAisGmConfig, CeAisGmSampler, ce_ais_gm_estimate
from .cmc_sampler import CrudeMonteCarloSampler

__all__ = [
    "SamplerInterface",
    "Problem",
    "default_batch_sizes",
    "default_initial_proposal",
    "draw_batch",
    "CicImportanceSampler",
    "PipelineConfig",
    "PipelineResult",
    "run_cic_is",
    "CeAisGmConfig",
    "CeAisGmSampler",
    "ce_ais_gm_estimate",
    "CrudeMonteCarloSampler",
]
