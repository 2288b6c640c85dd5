import logging
from dataclasses import dataclass, field

from core.errors import ConfigurationError
from em.weighted_em import em_sweep
from estimator.batch_store import BatchStore
from estimator.cross_entropy import rho_estimate_batch
from sampler.problem import INITIAL_COMPONENTS, default_batch_sizes, default_initial_proposal, draw_batch
from sampler.sampler_interface import SamplerInterface
from utils.rng_utils import PURPOSE_FINAL_BATCH, PURPOSE_INITIAL_PROPOSAL, PURPOSE_SAMPLING, child_generator

# ロガーの取得
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CeAisGmConfig:
    """
    成分数固定・1反復1回更新の比較手法の設定

    Attributes:
        tau: 反復回数
        batch_sizes: n_0..n_τ
        k: 固定の成分数
    """

    tau: int = 7
    batch_sizes: tuple = field(default_factory=default_batch_sizes)
    k: int = INITIAL_COMPONENTS

    def __post_init__(self):
        if self.tau < 1 or len(self.batch_sizes) != self.tau + 1:
            raise ConfigurationError(f"expected tau >= 1 and {self.tau + 1} batch sizes")
        if any(n < 1 for n in self.batch_sizes) or self.k < 1:
            raise ConfigurationError("batch sizes and k must be positive")

    @property
    def n_total(self):
        return sum(self.batch_sizes)


def ce_ais_gm_estimate(problem, config, rng):
    """
    成分数を固定し、各反復で最新バッチに更新式を1回だけ適用する適応的重要度サンプリング

    退化した成分はそのスイープでは前の値のまま残す。ρ は最終バッチだけで推定する。

    Args:
        problem: Problem
        config: CeAisGmConfig
        rng: numpy.random.Generator

    Returns:
        float: ρの推定値
    """
    p = problem.dim
    store = BatchStore(p)
    proposal = default_initial_proposal(p, child_generator(rng, 0, PURPOSE_INITIAL_PROPOSAL), k=config.k)

    for t in range(1, config.tau + 1):
        batch = draw_batch(
            problem, store, proposal, config.batch_sizes[t - 1], child_generator(rng, t, PURPOSE_SAMPLING)
        )
        if batch.n_positive() == 0:
            logger.debug(f"t={t}: no sample hit the support of r, keeping the proposal")
            continue
        proposal = em_sweep(store, range(t - 1, t), proposal, freeze_degenerate=True)

    draw_batch(
        problem, store, proposal, config.batch_sizes[config.tau], child_generator(rng, config.tau + 1, PURPOSE_FINAL_BATCH)
    )
    return rho_estimate_batch(store, config.tau)


class CeAisGmSampler(SamplerInterface):
    """
    成分数固定の比較手法

    Args:
        config: CeAisGmConfig
    """

    def __init__(self, config=None):
        self.config = config or CeAisGmConfig()

    @property
    def name(self):
        return "ce-ais-gm"

    def estimate(self, problem, rng):
        return ce_ais_gm_estimate(problem, self.config, rng)

    def total_evaluations(self):
        return self.config.n_total
