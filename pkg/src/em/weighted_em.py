import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from core.errors import (
    ConfigurationError,
    DegenerateComponent,
    InsufficientPoints,
    NoEffectiveSamples,
    NotPositiveDefinite,
)
from core.linalg import cholesky, condition_number, eigenvalues, scaled_identity
from estimator.cross_entropy import cross_entropy_from_arrays
from mixture.gmm import GmmParams, component_logpdfs
from utils.parallel_utils import run_in_parallel
from utils.rng_utils import child_generators

# ロガーの取得
logger = logging.getLogger(__name__)

# これより小さい混合重みは成分の消失とみなす
MIN_COMPONENT_WEIGHT = 1e-12
# 丸め誤差による非正定値を補正するジッタの係数（trace/p 倍）
JITTER_SCALE = 1e-12


@dataclass(frozen=True)
class EmConfig:
    """
    EMアルゴリズムの設定

    Attributes:
        max_sweeps: EMの最大反復回数
        rel_improvement_threshold: C̄ の相対減少量がこれ未満なら収束
        condition_abort: 共分散の条件数がこれを超えたら中断
        n_restarts: マルチスタートの初期値の数
        abort_limit: 中断数がこれ以上なら k が大きすぎると判定
        workers: マルチスタートを並列実行するスレッド数
    """

    max_sweeps: int = 10
    rel_improvement_threshold: float = 0.01
    condition_abort: float = 1e5
    n_restarts: int = 10
    abort_limit: int = 5
    workers: int = 1

    def __post_init__(self):
        for name in ("max_sweeps", "rel_improvement_threshold", "condition_abort", "n_restarts", "abort_limit", "workers"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"EmConfig.{name} must be positive (got {getattr(self, name)!r})")
        if self.abort_limit > self.n_restarts:
            raise ConfigurationError(
                f"abort_limit ({self.abort_limit}) cannot exceed n_restarts ({self.n_restarts})"
            )


class EmStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_SWEEPS = "max_sweeps"
    ABORTED = "aborted"


@dataclass(frozen=True)
class EmOutcome:
    """
    EMの実行結果

    Attributes:
        status: 収束・最大反復到達・中断のいずれか
        params: 最終パラメータ（中断時はNone）
        objective: 最終パラメータでの C̄（中断時はnan）
        sweeps_used: 実行したスイープ数
        reason: 中断の理由
        restart: マルチスタートでのリスタート番号
        restarts: マルチスタートで選ばれた結果に付随する全リスタートの結果
    """

    status: EmStatus
    params: GmmParams = None
    objective: float = math.nan
    sweeps_used: int = 0
    reason: str = ""
    restart: int = None
    restarts: tuple = field(default=(), repr=False)

    @property
    def aborted(self):
        return self.status is EmStatus.ABORTED


@dataclass(frozen=True)
class TooManyAborts:
    """
    マルチスタートEMの中断数が閾値以上だった（k が大きすぎる）

    Attributes:
        k: 成分数
        n_aborted: 中断されたリスタート数
        n_restarts: リスタート総数
        restarts: 各リスタートの結果
    """

    k: int
    n_aborted: int
    n_restarts: int
    restarts: tuple = field(default=(), repr=False)


def _aborted(sweeps_used, reason):
    logger.debug(f"EM aborted after {sweeps_used} sweeps: {reason}")
    return EmOutcome(status=EmStatus.ABORTED, sweeps_used=sweeps_used, reason=reason)


def _positive_sample(store, batch_range):
    """範囲内の正の重みの点と重み、点の総数を返す"""
    points, weights = store.gather(batch_range)
    positive = weights > 0.0
    if not np.any(positive):
        raise NoEffectiveSamples(points.shape[0], len(list(batch_range)))
    return points[positive], weights[positive], points.shape[0]


def responsibilities(theta, x):
    """
    各点の成分への帰属確率 γ_j = α_j q_j(x) / Σ α_j' q_j'(x)

    対数領域で計算してから正規化する。

    Args:
        theta: GmmParams
        x: p次元ベクトル、または (n, p) の配列

    Returns:
        np.ndarray: 長さkのベクトル、または (n, k) の配列
    """
    x = np.asarray(x, dtype=float)
    log_joint = component_logpdfs(theta, x)
    gamma = np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))
    gamma /= np.sum(gamma, axis=1, keepdims=True)
    if x.ndim == 1:
        return gamma[0]
    return gamma


def _covariance_or_jitter(cov, component):
    """
    更新後の共分散を分解する。丸め誤差による非正定値には一度だけジッタを加える
    """
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(cov)):
        raise DegenerateComponent("covariance has non-finite entries", component)
    try:
        return cholesky(cov)
    except NotPositiveDefinite:
        pass

    p = cov.shape[0]
    scale = np.trace(cov) / p
    lam_min = eigenvalues(cov)[0]
    if scale > 0.0 and lam_min > -JITTER_SCALE * scale:
        try:
            return cholesky(cov + JITTER_SCALE * scale * np.eye(p))
        except NotPositiveDefinite:
            pass
    raise DegenerateComponent(f"covariance is not positive definite (min eigenvalue {lam_min:.3e})", component)


def _sweep_arrays(theta, points, weights, freeze_degenerate=False):
    """
    正の重みの点に対して更新式を1回適用する

    Args:
        theta: 現在のパラメータ
        points: 重みが正の点 (m, p)
        weights: 重み（長さm）
        freeze_degenerate: Trueなら退化した成分を前の値のまま残す

    Returns:
        GmmParams: 更新後のパラメータ
    """
    gamma = responsibilities(theta, points)
    weighted_gamma = weights[:, None] * gamma
    totals = np.sum(weighted_gamma, axis=0)
    total_weight = np.sum(weights)

    new_weights, new_means, new_covs = [], [], []
    for j in range(theta.k):
        try:
            if not (np.isfinite(totals[j]) and totals[j] > 0.0):
                raise DegenerateComponent("responsibility mass underflowed to zero", j)
            alpha = totals[j] / total_weight
            if alpha < MIN_COMPONENT_WEIGHT:
                raise DegenerateComponent(f"mixture weight vanished ({alpha:.3e})", j)
            mean = weighted_gamma[:, j] @ points / totals[j]
            # 共分散は同じスイープで求めた新しい平均を使う
            diff = points - mean
            cov = (diff * weighted_gamma[:, j, None]).T @ diff / totals[j]
            cov = _covariance_or_jitter(cov, j)
        except DegenerateComponent as e:
            if not freeze_degenerate:
                raise
            logger.warning(f"Keeping previous parameters of component {j}: {e.reason}")
            alpha, mean, cov = theta.weights[j], theta.means[j], theta.covs[j]
        new_weights.append(alpha)
        new_means.append(mean)
        new_covs.append(cov)

    new_weights = np.asarray(new_weights)
    return GmmParams(new_weights / np.sum(new_weights), np.asarray(new_means), new_covs)


def em_sweep(store, batch_range, theta, freeze_degenerate=False):
    """
    重み付きEMの1スイープ（Eステップと α, μ, Σ の更新）

    範囲内の全バッチの点を使う。重み0の点は更新に寄与しない。

    Args:
        store: BatchStore
        batch_range: 対象バッチの range
        theta: 現在のパラメータ
        freeze_degenerate: Trueなら退化した成分を前の値のまま残す

    Returns:
        GmmParams: 更新後のパラメータ

    Raises:
        NoEffectiveSamples: 範囲内に正の重みの点がない
        DegenerateComponent: 成分が退化した（freeze_degenerate=False の場合）
    """
    points, weights, _ = _positive_sample(store, batch_range)
    return _sweep_arrays(theta, points, weights, freeze_degenerate)


def _fit_arrays(points, weights, n_total, init, config):
    theta = init
    previous = cross_entropy_from_arrays(theta, points, weights, n_total)
    objective = previous

    for sweep in range(1, config.max_sweeps + 1):
        try:
            theta = _sweep_arrays(theta, points, weights)
        except DegenerateComponent as e:
            return _aborted(sweep, str(e))

        worst = max(condition_number(c) for c in theta.covs)
        if worst > config.condition_abort:
            return _aborted(sweep, f"condition number {worst:.3e} exceeds {config.condition_abort:.0e}")

        objective = cross_entropy_from_arrays(theta, points, weights, n_total)
        if not np.isfinite(objective):
            return _aborted(sweep, "objective is not finite")

        if previous == 0.0:
            return EmOutcome(EmStatus.CONVERGED, theta, objective, sweep)
        reduction = (previous - objective) / abs(previous)
        logger.debug(f"EM sweep {sweep}: objective={objective:.6e}, reduction={reduction:.3e}")
        if reduction < config.rel_improvement_threshold:
            return EmOutcome(EmStatus.CONVERGED, theta, objective, sweep)
        previous = objective

    return EmOutcome(EmStatus.MAX_SWEEPS, theta, objective, config.max_sweeps)


def em_fit(store, batch_range, init, config):
    """
    C̄ の相対減少が閾値未満になるか最大反復に達するまでEMを繰り返す

    各スイープ後に全成分の共分散の条件数を検査し、閾値を超えたら中断する。

    Args:
        store: BatchStore
        batch_range: 対象バッチの range
        init: 初期パラメータ
        config: EmConfig

    Returns:
        EmOutcome: 実行結果

    Raises:
        NoEffectiveSamples: 範囲内に正の重みの点がない
    """
    points, weights, n_total = _positive_sample(store, batch_range)
    return _fit_arrays(points, weights, n_total, init, config)


def initialize_params(store, batch_range, k, rng):
    """
    EMの初期パラメータをランダムに作成する

    平均は正の重みの点から非復元抽出し、足りない分は重み0の点から補う。
    共分散はすべて (3/p)·trace(範囲内の全点の標本共分散)·I、重みは 1/k。

    Args:
        store: BatchStore
        batch_range: 対象バッチの range
        k: 成分数
        rng: numpy.random.Generator

    Returns:
        GmmParams: 初期パラメータ

    Raises:
        InsufficientPoints: 範囲内の点がk未満
        DegenerateComponent: 点の広がりが0で共分散を作れない
    """
    points, weights = store.gather(batch_range)
    n_total, p = points.shape
    if n_total < k:
        raise InsufficientPoints(f"{n_total} points cannot initialize {k} components")

    positive = np.flatnonzero(weights > 0.0)
    zero = np.flatnonzero(weights <= 0.0)
    n_from_positive = min(k, positive.shape[0])
    chosen = list(rng.choice(positive, size=n_from_positive, replace=False)) if n_from_positive else []
    if n_from_positive < k:
        chosen += list(rng.choice(zero, size=k - n_from_positive, replace=False))

    sample_cov = np.atleast_2d(np.cov(points, rowvar=False)) if n_total > 1 else np.zeros((p, p))
    scale = 3.0 / p * float(np.trace(sample_cov))
    if not (np.isfinite(scale) and scale > 0.0):
        raise DegenerateComponent("sample covariance of the data has zero trace")
    cov = scaled_identity(p, scale)
    return GmmParams(np.full(k, 1.0 / k), points[chosen], [cov] * k)


def _run_restart(store, batch_range, k, config, rng, restart, fit_data):
    try:
        init = initialize_params(store, batch_range, k, rng)
    except (DegenerateComponent, InsufficientPoints) as e:
        return replace(_aborted(0, f"initialization failed: {e}"), restart=restart)
    outcome = _fit_arrays(*fit_data, init, config)
    return replace(outcome, restart=restart)


def em_fit_multistart(store, batch_range, k, config, rng):
    """
    ランダムな初期値から複数回EMを実行し、C̄ が最小の結果を選ぶ

    リスタートは親ストリームからキーで分岐した乱数を使うため、
    並列実行と逐次実行で同じ結果が選ばれる。

    Args:
        store: BatchStore
        batch_range: 対象バッチの range
        k: 成分数
        config: EmConfig
        rng: numpy.random.Generator

    Returns:
        EmOutcome | TooManyAborts: 最良の結果、または中断数が閾値以上の場合 TooManyAborts

    Raises:
        NoEffectiveSamples: 範囲内に正の重みの点がない
    """
    fit_data = _positive_sample(store, batch_range)
    jobs = [
        (store, batch_range, k, config, restart_rng, i, fit_data)
        for i, restart_rng in enumerate(child_generators(rng, config.n_restarts))
    ]
    outcomes = tuple(run_in_parallel(_run_restart, jobs, max_workers=config.workers, label="EM restart"))

    n_aborted = sum(1 for o in outcomes if o.aborted)
    if n_aborted >= config.abort_limit:
        logger.info(f"k={k}: {n_aborted} of {config.n_restarts} EM restarts aborted")
        return TooManyAborts(k, n_aborted, config.n_restarts, outcomes)

    # 目的関数値、次にリスタート番号で順序付けて決定的に選ぶ
    best = min((o for o in outcomes if not o.aborted), key=lambda o: (o.objective, o.restart))
    logger.debug(
        f"k={k}: best restart {best.restart} ({best.status.value}), objective={best.objective:.6e}, "
        f"{n_aborted} aborted"
    )
    return replace(best, restarts=outcomes)
