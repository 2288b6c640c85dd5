"""
放物線状の限界状態による故障確率推定ベンチマーク
"""

from .parabolic import (
    ParabolicLimitState,
    cross_entropy_oracle,
    failure_probability,
    limit_state_g,
    make_problem,
    run_ce_ais_gm,
    run_cmc,
    true_rho_oracle,
)
from .experiment import (
    METHOD_CE_AIS_GM,
    METHOD_CIC_IS,
    METHOD_CMC,
    METHOD_CMC_ANALYTIC,
    ExperimentSummary,
    analytic_cmc_summary,
    cmc_ratio,
    compare_with_reference,
    read_summary_csv,
    run_experiment,
    summaries_to_dataframe,
    summarize_estimates,
    write_summary_csv,
)

__all__ = [
    "ParabolicLimitState",
    "cross_entropy_oracle",
    "failure_probability",
    "limit_state_g",
    "make_problem",
    "run_ce_ais_gm",
    "run_cmc",
    "true_rho_oracle",
    "METHOD_CE_AIS_GM",
    "METHOD_CIC_IS",
    "METHOD_CMC",
    "METHOD_CMC_ANALYTIC",
    "ExperimentSummary",
    "analytic_cmc_summary",
    "cmc_ratio",
    "compare_with_reference",
    "read_summary_csv",
    "run_experiment",
    "summaries_to_dataframe",
    "summarize_estimates",
    "write_summary_csv",
]
