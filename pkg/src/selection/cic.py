import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from core.errors import GridExhausted, NoEffectiveSamples, TooManyAbortsError
from em.weighted_em import EmOutcome, TooManyAborts, em_fit_multistart
from estimator.cross_entropy import rho_estimate_batch, rho_estimate_cumulative
from mixture.gmm import free_param_dimension
from utils.rng_utils import child_generator

# ロガーの取得
logger = logging.getLogger(__name__)

# CICの移動平均の窓幅
MOVING_AVERAGE_WINDOW = 4
# 成分数の絶対的な上限
ABSOLUTE_K_CAP = 50
# 前反復の k* から k_min を下げる幅
K_MIN_BACKOFF = 3

TRACE_COLUMNS = ["t", "k", "d", "status", "cbar", "rho_hat", "cic", "chosen"]


@dataclass(frozen=True)
class CicEntry:
    """
    グリッド探索の1点（成分数k）の結果

    Attributes:
        k: 成分数
        d: 自由パラメータ数
        outcome: マルチスタートEMの結果（EmOutcome または TooManyAborts）
        cbar: 選ばれたパラメータでの C̄（TooManyAbortsの場合はnan）
        rho_hat: CICに使ったρの推定値
        cic: CICの値（TooManyAbortsの場合はnan）
    """

    k: int
    d: int
    outcome: object
    cbar: float
    rho_hat: float
    cic: float

    @property
    def completed(self):
        return isinstance(self.outcome, EmOutcome)

    @property
    def status(self):
        if self.completed:
            return self.outcome.status.value
        return "too_many_aborts"


@dataclass(frozen=True)
class CicTrace:
    """
    1回のグリッド探索の記録

    Attributes:
        entries: kの昇順に並んだ CicEntry のタプル
        chosen_k: CICが最小の成分数
        chosen_params: chosen_k で選ばれたパラメータ
        t: 反復番号
        total_n: CICの罰則項の分母 Σn_s
        stop_reason: 探索を止めた理由
    """

    entries: tuple
    chosen_k: int
    chosen_params: object
    t: int = 1
    total_n: int = 0
    stop_reason: str = ""

    def chosen_entry(self):
        return next(e for e in self.entries if e.k == self.chosen_k)

    def rows(self):
        """CSV/JSON出力用の行（TRACE_COLUMNS の順）"""
        return [
            CicTraceRow(
                t=self.t,
                k=e.k,
                d=e.d,
                status=e.status,
                cbar=e.cbar,
                rho_hat=e.rho_hat,
                cic=e.cic,
                chosen=int(e.k == self.chosen_k),
            )
            for e in self.entries
        ]


@dataclass(frozen=True)
class CicTraceRow:
    """トレースCSVの1行"""

    t: int
    k: int
    d: int
    status: str
    cbar: float
    rho_hat: float
    cic: float
    chosen: int

    def as_list(self):
        """JSON用の配列。nanはNoneにする"""
        return [None if isinstance(v, float) and math.isnan(v) else v for v in (
            self.t, self.k, self.d, self.status, self.cbar, self.rho_hat, self.cic, self.chosen
        )]

    def __eq__(self, other):
        if not isinstance(other, CicTraceRow):
            return NotImplemented
        return all(
            (a == b) or (isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))
            for a, b in zip(self.as_tuple(), other.as_tuple())
        )

    def as_tuple(self):
        return (self.t, self.k, self.d, self.status, self.cbar, self.rho_hat, self.cic, self.chosen)


def cic_value(cbar, rho_hat, d, total_n):
    """
    CIC = C̄(θ̂) + ρ̂·d / Σn_s

    Args:
        cbar: 交差エントロピーの推定値
        rho_hat: ρの推定値（非負）
        d: 自由パラメータ数
        total_n: 推定に使った点の総数

    Returns:
        float: CICの値
    """
    if total_n < 1:
        raise ValueError(f"total_n must be at least 1 (got {total_n})")
    return cbar + rho_hat * d / total_n


def moving_average_increased(values, window=MOVING_AVERAGE_WINDOW):
    """
    直近window個の移動平均が、1つ前の移動平均より増加したかどうか

    Args:
        values: 完了したkのCIC値（kの昇順）
        window: 窓幅

    Returns:
        bool: 増加していればTrue（値がwindow+1個未満ならFalse）
    """
    if len(values) < window + 1:
        return False
    current = float(np.mean(values[-window:]))
    previous = float(np.mean(values[-window - 1:-1]))
    return current > previous


def k_cap(n_effective, p):
    """成分数の上限 min(50, floor(n_effective / (p+1)))（最低1）"""
    return max(1, min(ABSOLUTE_K_CAP, n_effective // (p + 1)))


def next_k_min(previous_k):
    """前反復の k* から次の反復の k_min を決める"""
    return max(1, previous_k - K_MIN_BACKOFF)


def cic_rho_hat(store, t, cumulative=True):
    """
    反復tのCICに使うρの推定値

    累積版では t=1 でバッチ0、t≥2 でバッチ 1..t−1 の推定量を使う。
    反復ごとの版では直前のバッチ t−1 だけを使う。
    """
    if cumulative:
        return rho_estimate_cumulative(store, t)
    return rho_estimate_batch(store, t - 1)


def select_model_order(store, batch_range, rho_hat, k_min, config, rng, t=1):
    """
    CICを最小にする成分数をグリッド探索で求める

    k = k_min, k_min+1, ... の順にマルチスタートEMを実行し、CICの4点移動平均が
    増加したとき、または TooManyAborts になったときに止める。最初のkで
    TooManyAborts になった場合は k_min を1つ下げてやり直す。

    Args:
        store: BatchStore
        batch_range: 対象バッチの range
        rho_hat: CICに使うρの推定値（探索全体で共通）
        k_min: 探索の開始点
        config: EmConfig
        rng: numpy.random.Generator（kごとにキーで分岐させる）
        t: 反復番号（記録用）

    Returns:
        CicTrace: 探索の記録

    Raises:
        NoEffectiveSamples: 範囲内に正の重みの点がない
        TooManyAbortsError: k=1 でも中断が多すぎる
        GridExhausted: 上限までに完了したkがない
    """
    if k_min < 1:
        raise ValueError(f"k_min must be at least 1 (got {k_min})")
    points, weights = store.gather(batch_range)
    total_n, p = points.shape
    n_effective = int(np.count_nonzero(weights > 0.0))
    if n_effective == 0:
        raise NoEffectiveSamples(total_n, len(list(batch_range)))

    cap = k_cap(n_effective, p)
    start = min(k_min, cap)
    results = {}

    def fit(k):
        # 同じkは同じ乱数ストリームで決まるので、やり直し時は結果を再利用する
        if k not in results:
            results[k] = em_fit_multistart(store, batch_range, k, config, child_generator(rng, k))
        return results[k]

    while True:
        entries = []
        completed = []
        stop_reason = "cap"
        k = start
        while k <= cap:
            outcome = fit(k)
            d = free_param_dimension(k, p)
            if isinstance(outcome, TooManyAborts):
                entries.append(CicEntry(k, d, outcome, math.nan, rho_hat, math.nan))
                stop_reason = "too_many_aborts"
                break
            cic = cic_value(outcome.objective, rho_hat, d, total_n)
            entries.append(CicEntry(k, d, outcome, outcome.objective, rho_hat, cic))
            completed.append(cic)
            logger.debug(f"t={t} k={k}: cbar={outcome.objective:.6e}, cic={cic:.6e}")
            if moving_average_increased(completed):
                stop_reason = "moving_average"
                break
            k += 1

        if completed or stop_reason == "cap":
            break
        if start == 1:
            aborted = results[1]
            raise TooManyAbortsError(1, aborted.n_aborted, aborted.n_restarts)
        logger.info(f"t={t}: EM failed at k_min={start}, lowering k_min to {start - 1}")
        start -= 1

    if stop_reason == "cap":
        logger.warning(
            f"t={t}: grid reached the cap k={cap} ({n_effective} effective points) "
            f"before the moving average of the CIC increased"
        )
    if not completed:
        raise GridExhausted(f"no k in [{start}, {cap}] completed")

    chosen = min((e for e in entries if e.completed), key=lambda e: (e.cic, e.k))
    logger.info(f"t={t}: chose k={chosen.k} (cic={chosen.cic:.6e}, searched k={start}..{entries[-1].k})")
    return CicTrace(
        entries=tuple(entries),
        chosen_k=chosen.k,
        chosen_params=chosen.outcome.params,
        t=t,
        total_n=total_n,
        stop_reason=stop_reason,
    )


def traces_to_dataframe(traces):
    """複数のトレースを1つのDataFrameにまとめる"""
    rows = [row.as_tuple() for trace in traces for row in trace.rows()]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def write_trace_csv(traces, output_path, header_lines=()):
    """
    トレースをCSVに書き出す（先頭に # で始まるコメント行を付けられる）

    Returns:
        str: 書き出したCSVの文字列
    """
    text = "".join(f"# {line}\n" for line in header_lines)
    text += traces_to_dataframe(traces).to_csv(index=False, lineterminator="\n")
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"CIC trace saved to: {output_path}")
    return text


def read_trace_csv(input_path):
    """
    write_trace_csv() で書き出したCSVを読み込む

    Returns:
        list: CicTraceRow のリスト
    """
    df = pd.read_csv(input_path, comment="#", float_precision="round_trip")
    return [
        CicTraceRow(
            t=int(r.t),
            k=int(r.k),
            d=int(r.d),
            status=str(r.status),
            cbar=float(r.cbar),
            rho_hat=float(r.rho_hat),
            cic=float(r.cic),
            chosen=int(r.chosen),
        )
        for r in df.itertuples(index=False)
    ]
