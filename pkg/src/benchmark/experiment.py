import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from benchmark.parabolic import make_problem
from core.errors import ConfigurationError, RepetitionFailure
from utils.parallel_utils import run_in_parallel
from utils.rng_utils import make_generator

# ロガーの取得
logger = logging.getLogger(__name__)

METHOD_CIC_IS = "cic-is"
METHOD_CE_AIS_GM = "ce-ais-gm"
METHOD_CMC = "cmc"
METHOD_CMC_ANALYTIC = "cmc-analytic"

# 集計に必要な成功した反復の割合
MIN_SUCCESS_FRACTION = 0.95

SUMMARY_COLUMNS = ["b", "method", "mean", "std_error", "cmc_ratio", "repetitions", "n_total", "failures"]


@dataclass(frozen=True)
class ExperimentSummary:
    """
    1つの手法の実験結果の集計

    Attributes:
        method: 手法名
        mean: 推定値の標本平均
        std_error: 標本標準偏差 / √反復数
        cmc_ratio: n_total / n_CMC
        repetitions: 成功した反復数
        n_total: 1回の推定での r の評価回数
        b: 限界状態の閾値
        failures: 失敗した反復数
    """

    method: str
    mean: float
    std_error: float
    cmc_ratio: float
    repetitions: int
    n_total: int
    b: float = math.nan
    failures: int = 0

    def __post_init__(self):
        if self.std_error < 0.0:
            raise ConfigurationError(f"std_error must be non-negative (got {self.std_error})")


def cmc_ratio(rho_bar, se, n_total):
    """
    CMC比 n_total / n_CMC、ただし n_CMC = ρ̄(1−ρ̄)/SE²

    Args:
        rho_bar: CIC-ISの標本平均
        se: その行の手法の標準誤差
        n_total: その行の手法の評価回数

    Returns:
        float: CMC比（SE=0 の極限では0）
    """
    if not 0.0 < rho_bar < 1.0:
        raise ValueError(f"rho_bar must lie in (0, 1) (got {rho_bar})")
    if se < 0.0:
        raise ValueError(f"se must be non-negative (got {se})")
    if se == 0.0:
        return 0.0
    n_cmc = rho_bar * (1.0 - rho_bar) / se**2
    return n_total / n_cmc


def analytic_cmc_summary(rho_bar, n_total, repetitions, b=math.nan):
    """
    CMCをシミュレーションせず、解析的な標準誤差 √(ρ̄(1−ρ̄)/n) で行を作る
    """
    se = math.sqrt(rho_bar * (1.0 - rho_bar) / n_total)
    return ExperimentSummary(
        method=METHOD_CMC_ANALYTIC,
        mean=rho_bar,
        std_error=se,
        cmc_ratio=cmc_ratio(rho_bar, se, n_total),
        repetitions=repetitions,
        n_total=n_total,
        b=b,
    )


def _run_repetition(sampler, ls, base_seed, repetition, method_index):
    # 反復と手法ごとに独立な乱数ストリームを使う
    rng = make_generator(base_seed, repetition, method_index)
    return sampler.estimate(make_problem(ls), rng)


def summarize_estimates(method, estimates, n_total, rho_bar=None, b=math.nan, failures=0):
    """
    推定値の列を集計する（順序に依存しないよう昇順に並べてから計算する）

    Args:
        method: 手法名
        estimates: 成功した反復の推定値
        n_total: 評価回数
        rho_bar: CMC比に使うCIC-ISの平均。Noneならこの手法の平均を使う
        b: 限界状態の閾値
        failures: 失敗した反復数

    Returns:
        ExperimentSummary: 集計結果
    """
    values = np.sort(np.asarray(estimates, dtype=float))
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1)) / math.sqrt(values.shape[0])
    reference_mean = mean if rho_bar is None else rho_bar
    try:
        ratio = cmc_ratio(reference_mean, se, n_total)
    except ValueError as e:
        logger.warning(f"CMC ratio of {method} is undefined: {e}")
        ratio = math.nan
    return ExperimentSummary(method, mean, se, ratio, int(values.shape[0]), int(n_total), b, failures)


def run_experiment(ls, methods, repetitions, base_seed, workers=1):
    """
    各手法を独立な乱数で repetitions 回実行し、集計する

    Args:
        ls: ParabolicLimitState
        methods: SamplerInterface の実装のリスト
        repetitions: 反復数（2以上）
        base_seed: ベースシード
        workers: 並列プロセス数

    Returns:
        list: 手法ごとの ExperimentSummary（methods と同じ順序）

    Raises:
        RepetitionFailure: 成功した反復が95%未満の手法がある
    """
    if repetitions < 2:
        raise ConfigurationError(f"repetitions must be at least 2 (got {repetitions})")

    jobs = [
        (sampler, ls, base_seed, repetition, method_index)
        for method_index, sampler in enumerate(methods)
        for repetition in range(repetitions)
    ]
    logger.info(
        f"Running {len(methods)} methods x {repetitions} repetitions for {ls.describe()} with {workers} workers"
    )
    results = run_in_parallel(
        _run_repetition, jobs, max_workers=workers, use_processes=True, capture_errors=True, label="repetition"
    )

    per_method = {}
    for method_index, sampler in enumerate(methods):
        chunk = results[method_index * repetitions:(method_index + 1) * repetitions]
        estimates = [r for r in chunk if not isinstance(r, Exception)]
        failures = repetitions - len(estimates)
        if failures:
            logger.warning(f"{sampler.name}: {failures} of {repetitions} repetitions failed")
        if len(estimates) < MIN_SUCCESS_FRACTION * repetitions or len(estimates) < 2:
            raise RepetitionFailure(
                f"{sampler.name}: only {len(estimates)} of {repetitions} repetitions succeeded"
            )
        per_method[sampler.name] = (sampler, estimates, failures)

    rho_bar = None
    if METHOD_CIC_IS in per_method:
        rho_bar = float(np.mean(np.sort(per_method[METHOD_CIC_IS][1])))
    else:
        logger.warning("No cic-is run in this experiment; CMC ratios use each method's own mean")

    summaries = []
    for name, (sampler, estimates, failures) in per_method.items():
        summary = summarize_estimates(
            name, estimates, sampler.total_evaluations(), rho_bar=rho_bar, b=ls.b, failures=failures
        )
        logger.info(
            f"b={ls.b} {name}: mean={summary.mean:.6f}, se={summary.std_error:.6f}, "
            f"cmc_ratio={summary.cmc_ratio:.2%}"
        )
        summaries.append(summary)
    return summaries


def summaries_to_dataframe(summaries):
    return pd.DataFrame([asdict(s) for s in summaries], columns=SUMMARY_COLUMNS)


def write_summary_csv(summaries, output_path, header_lines=()):
    """
    集計結果をCSVに書き出す（先頭に # で始まるコメント行を付けられる）

    Returns:
        str: 書き出したCSVの文字列
    """
    text = "".join(f"# {line}\n" for line in header_lines)
    text += summaries_to_dataframe(summaries).to_csv(index=False, lineterminator="\n")
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"Experiment summary saved to: {output_path}")
    return text


def read_summary_csv(input_path):
    """
    write_summary_csv() で書き出したCSVを読み込む

    Returns:
        list: ExperimentSummary のリスト
    """
    df = pd.read_csv(input_path, comment="#", float_precision="round_trip")
    return [
        ExperimentSummary(
            method=str(r.method),
            mean=float(r.mean),
            std_error=float(r.std_error),
            cmc_ratio=float(r.cmc_ratio),
            repetitions=int(r.repetitions),
            n_total=int(r.n_total),
            b=float(r.b),
            failures=int(r.failures),
        )
        for r in df.itertuples(index=False)
    ]


def compare_with_reference(summaries, reference):
    """
    集計結果を参照結果（YAML）と比較する

    Args:
        summaries: ExperimentSummary のリスト
        reference: load_reference_table() の戻り値

    Returns:
        list: 比較できた行ごとの辞書（b, method, 参照値、差を参照SEで割った値）
    """
    rows = []
    for entry in reference.get("results", []):
        for s in summaries:
            if s.method != entry.get("method") or not math.isclose(s.b, float(entry.get("b", math.nan))):
                continue
            z = (s.mean - entry["mean"]) / entry["std_error"]
            rows.append(
                {
                    "b": s.b,
                    "method": s.method,
                    "reference_mean": entry["mean"],
                    "reference_std_error": entry["std_error"],
                    "mean": s.mean,
                    "std_error": s.std_error,
                    "z": z,
                }
            )
            level = logging.INFO if abs(z) <= 3.0 else logging.WARNING
            logger.log(
                level,
                f"b={s.b} {s.method}: mean {s.mean:.6f} vs reference {entry['mean']:.6f} "
                f"({z:+.2f} reference SE)",
            )
    return rows
