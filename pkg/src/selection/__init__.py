"""
CICによるモデル次数選択パッケージ
"""

from .cic import (
    CicEntry,
    CicTrace,
    CicTraceRow,
    cic_rho_hat,
    cic_value,
    k_cap,
    moving_average_increased,
    next_k_min,
    read_trace_csv,
    select_model_order,
    traces_to_dataframe,
    write_trace_csv,
)

__all__ = [
    "CicEntry",
    "CicTrace",
    "CicTraceRow",
    "cic_rho_hat",
    "cic_value",
    "k_cap",
    "moving_average_increased",
    "next_k_min",
    "read_trace_csv",
    "select_model_order",
    "traces_to_dataframe",
    "write_trace_csv",
]
