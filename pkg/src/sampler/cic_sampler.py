import logging
from dataclasses import dataclass, field

from core.errors import ConfigurationError, DimensionMismatch, NoEffectiveSamples, TooManyAbortsError
from em.weighted_em import EmConfig
from estimator.batch_store import BatchStore
from estimator.cross_entropy import rho_estimate_batch, rho_estimate_cumulative
from mixture.gmm import GmmParams
from sampler.problem import default_batch_sizes, default_initial_proposal, draw_batch
from sampler.sampler_interface import SamplerInterface
from selection.cic import cic_rho_hat, next_k_min, select_model_order
from utils.io_utils import dump_json, save_text
from utils.rng_utils import (
    PURPOSE_FINAL_BATCH,
    PURPOSE_INITIAL_PROPOSAL,
    PURPOSE_MODEL_SELECTION,
    PURPOSE_SAMPLING,
    child_generator,
    make_generator,
)

# ロガーの取得
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """
    CIC-ISの設定

    Attributes:
        tau: 反復回数τ
        batch_sizes: n_0..n_τ（最後が最終推定用バッチ）
        initial_proposal: 初期提案分布η。Noneなら default_initial_proposal で作成する
        em: EMの設定
        master_seed: マスターシード（rngを渡さない場合に使用）
        cumulative: Falseなら最新バッチだけで近似する反復ごとの版
    """

    tau: int = 7
    batch_sizes: tuple = field(default_factory=default_batch_sizes)
    initial_proposal: GmmParams = None
    em: EmConfig = field(default_factory=EmConfig)
    master_seed: int = 0
    cumulative: bool = True

    def __post_init__(self):
        if self.tau < 1:
            raise ConfigurationError(f"tau must be at least 1 (got {self.tau})")
        if len(self.batch_sizes) != self.tau + 1:
            raise ConfigurationError(
                f"expected {self.tau + 1} batch sizes for tau={self.tau}, got {len(self.batch_sizes)}"
            )
        if any(n < 1 for n in self.batch_sizes):
            raise ConfigurationError(f"batch sizes must be positive: {self.batch_sizes}")

    @property
    def n_total(self):
        return sum(self.batch_sizes)


@dataclass(frozen=True)
class PipelineResult:
    """
    CIC-ISの実行結果

    Attributes:
        final_params: 最後に選ばれた提案分布 θ̂^(τ)
        rho_hat_final: ρの最終推定値
        traces: 反復ごとの CicTrace
        store: 全バッチを保持する BatchStore
        k_history: 反復ごとに選ばれた成分数
        n_evaluations: r の評価回数
    """

    final_params: GmmParams
    rho_hat_final: float
    traces: tuple
    store: BatchStore
    k_history: tuple
    n_evaluations: int

    def to_dict(self, master_seed=None):
        data = {
            "rho_hat_final": self.rho_hat_final,
            "k_history": list(self.k_history),
            "n_evaluations": self.n_evaluations,
            "batch_sizes": [b.size for b in self.store],
            "final_params": self.final_params.to_dict(),
            "traces": [[row.as_list() for row in trace.rows()] for trace in self.traces],
        }
        if master_seed is not None:
            data["master_seed"] = master_seed
        return data

    def save_json(self, output_path, master_seed=None):
        """結果をJSONファイルに保存する"""
        return save_text(dump_json(self.to_dict(master_seed)), output_path)


def run_cic_is(problem, config, rng=None):
    """
    CICで成分数を選びながら提案分布を更新し、ρを推定する

    t = 1..τ で、現在の提案分布からバッチ t−1 を生成し、累積データで
    成分数のグリッド探索を行って提案分布を更新する。最後に θ̂^(τ) から
    最終バッチを生成し、バッチ 1..τ の累積推定量を返す。

    Args:
        problem: Problem
        config: PipelineConfig
        rng: numpy.random.Generator。Noneなら config.master_seed から作成する

    Returns:
        PipelineResult: 実行結果

    Raises:
        NoEffectiveSamples: 初期提案分布の点が r の台に1つも入らなかった
        TooManyAbortsError: k=1 でもEMの中断が多すぎる
    """
    if rng is None:
        rng = make_generator(config.master_seed)
    p = problem.dim
    store = BatchStore(p)
    proposal = config.initial_proposal
    if proposal is None:
        proposal = default_initial_proposal(p, child_generator(rng, 0, PURPOSE_INITIAL_PROPOSAL))
    if proposal.p != p:
        raise DimensionMismatch(f"initial proposal dimension {proposal.p} != problem dimension {p}")

    traces = []
    k_history = []
    n_evaluations = 0
    k_min = 1
    for t in range(1, config.tau + 1):
        batch = draw_batch(
            problem, store, proposal, config.batch_sizes[t - 1], child_generator(rng, t, PURPOSE_SAMPLING)
        )
        n_evaluations += batch.size

        batch_range = range(0, t) if config.cumulative else range(t - 1, t)
        rho_hat = cic_rho_hat(store, t, config.cumulative)
        try:
            trace = select_model_order(
                store,
                batch_range,
                rho_hat,
                k_min,
                config.em,
                child_generator(rng, t, PURPOSE_MODEL_SELECTION),
                t=t,
            )
        except NoEffectiveSamples:
            logger.error(
                f"t={t}: no sample hit the support of r "
                f"({batch.n_positive()} of {batch.size} in the newest batch, "
                f"{store.total_size(batch_range)} points searched)"
            )
            raise
        except TooManyAbortsError as e:
            logger.error(f"t={t}: EM aborted even at k=1 ({e})")
            raise

        proposal = trace.chosen_params
        traces.append(trace)
        k_history.append(trace.chosen_k)
        logger.info(f"t={t}: rho_hat={rho_hat:.6e}, k*={trace.chosen_k}, hits={batch.n_positive()}/{batch.size}")
        k_min = next_k_min(trace.chosen_k)

    final_batch = draw_batch(
        problem, store, proposal, config.batch_sizes[config.tau], child_generator(rng, config.tau + 1, PURPOSE_FINAL_BATCH)
    )
    n_evaluations += final_batch.size

    if config.cumulative:
        rho_hat_final = rho_estimate_cumulative(store, config.tau + 1)
    else:
        rho_hat_final = rho_estimate_batch(store, config.tau)
    logger.info(f"CIC-IS finished: rho_hat={rho_hat_final:.6e}, k history={k_history}")

    return PipelineResult(
        final_params=proposal,
        rho_hat_final=rho_hat_final,
        traces=tuple(traces),
        store=store,
        k_history=tuple(k_history),
        n_evaluations=n_evaluations,
    )


class CicImportanceSampler(SamplerInterface):
    """
    CIC-IS を実験用の推定手法として包む

    Args:
        config: PipelineConfig
    """

    def __init__(self, config=None):
        self.config = config or PipelineConfig()

    @property
    def name(self):
        return "cic-is"

    def estimate(self, problem, rng):
        return run_cic_is(problem, self.config, rng).rho_hat_final

    def total_evaluations(self):
        return self.config.n_total
