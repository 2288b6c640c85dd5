import logging

import numpy as np

from mixture.gmm import gmm_logpdf

# ロガーの取得
logger = logging.getLogger(__name__)


def cross_entropy_estimate(store, theta, batch_range):
    """
    交差エントロピー C(θ) = −∫ r log q_θ dμ の累積推定量

    C̄(θ) = −(1/Σn_s) Σ_s Σ_i w_i^(s) log q_θ(x_i^(s))。
    重み0の点は log q_θ の値によらず寄与しないが、分母には含まれる。

    Args:
        store: BatchStore
        theta: 評価するGMMパラメータ
        batch_range: 対象バッチの range（1バッチなら反復ごとの推定量になる）

    Returns:
        float: 推定値
    """
    points, weights = store.gather(batch_range)
    positive = weights > 0.0
    return cross_entropy_from_arrays(
        theta, points[positive], weights[positive], points.shape[0]
    )


def cross_entropy_from_arrays(theta, points, weights, n_total):
    """
    重みが正の点だけを受け取って C̄(θ) を計算する（EMの内部ループ用）

    Args:
        theta: GMMパラメータ
        points: 重みが正の点 (m, p)
        weights: 対応する重み（長さm）
        n_total: 重み0の点も含めた点の総数（分母）

    Returns:
        float: 推定値
    """
    if points.shape[0] == 0:
        return 0.0
    log_q = gmm_logpdf(theta, points)
    # np.sum は連続配列に対してペアワイズ加算を行う
    return -float(np.sum(weights * log_q)) / n_total


def rho_estimate_batch(store, s):
    """
    1バッチの重要度サンプリング推定量 ρ̂ = (1/n_s) Σ_i w_i

    Args:
        store: BatchStore
        s: バッチインデックス

    Returns:
        float: 推定値
    """
    weights = store.batch(s).weights
    return float(np.sum(weights)) / weights.shape[0]


def rho_estimate_range(store, batch_range):
    """範囲内の全点の重みの平均"""
    _, weights = store.gather(batch_range)
    return float(np.sum(weights)) / weights.shape[0]


def rho_estimate_cumulative(store, t):
    """
    反復tにおける ρ の累積推定量

    t=1 ではバッチ0の平均重み、t≥2 ではバッチ 1..t−1 の平均重み（バッチ0は除外）。

    Args:
        store: BatchStore
        t: 反復インデックス（t≥1）

    Returns:
        float: 推定値
    """
    if t < 1:
        raise ValueError(f"t must be at least 1 (got {t})")
    if t == 1:
        return rho_estimate_batch(store, 0)
    return rho_estimate_range(store, range(1, t))


def effective_support(store, batch_range):
    """
    範囲内の点を重みが正の点と0の点に分ける

    インデックスは gather() で連結した順序に対するもので、順序は保たれる。

    Returns:
        tuple: (正の重みの点のインデックス, 重み0の点のインデックス)
    """
    _, weights = store.gather(batch_range)
    positive = weights > 0.0
    return np.flatnonzero(positive), np.flatnonzero(~positive)
