import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from core.linalg import scaled_identity
from mixture.gmm import GmmParams, gmm_sample

# ロガーの取得
logger = logging.getLogger(__name__)

# 初期提案分布の成分数と共分散のスケール
INITIAL_COMPONENTS = 30
INITIAL_COV_SCALE = 3.0
# 既定のバッチサイズ n_0..n_6 と最終バッチ n_7
DEFAULT_TAU = 7
DEFAULT_BATCH_SIZE = 1000
DEFAULT_FINAL_BATCH_SIZE = 1700


def default_batch_sizes(tau=DEFAULT_TAU, batch_size=DEFAULT_BATCH_SIZE, final_batch_size=DEFAULT_FINAL_BATCH_SIZE):
    """n_0..n_{τ−1} = batch_size、n_τ = final_batch_size のタプル"""
    return (int(batch_size),) * int(tau) + (int(final_batch_size),)


@dataclass(frozen=True)
class Problem:
    """
    正規化定数を推定したい非負関数 r

    Attributes:
        dim: 次元p
        log_r: log r(x)。r(x)=0 の点では −∞ を返す。決定的で副作用がないこと
        description: 説明
        vectorized: Trueなら log_r は (n, p) の配列を受け取り長さnの配列を返す
    """

    dim: int
    log_r: Callable
    description: str = ""
    vectorized: bool = False

    def evaluate(self, points):
        """
        点の集合で log r を評価する

        Args:
            points: (n, p) の配列

        Returns:
            np.ndarray: 長さnの log r
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.vectorized:
            return np.asarray(self.log_r(points), dtype=float).reshape(-1)
        return np.array([self.log_r(x) for x in points], dtype=float)


def default_initial_proposal(p, rng, k=INITIAL_COMPONENTS, scale=INITIAL_COV_SCALE):
    """
    初期提案分布 η：平均を標準正規から生成し、共分散は 3I、重みは 1/k

    Args:
        p: 次元
        rng: numpy.random.Generator
        k: 成分数
        scale: 共分散のスケール

    Returns:
        GmmParams: 初期提案分布
    """
    means = rng.standard_normal((k, p))
    cov = scaled_identity(p, scale)
    return GmmParams(np.full(k, 1.0 / k), means, [cov] * k)


def draw_batch(problem, store, proposal, n, rng):
    """
    提案分布からn点を生成し、r を評価して重み付きバッチとしてストアに追加する

    Returns:
        Batch: 追加したバッチ
    """
    points = gmm_sample(rng, proposal, size=n)
    log_r = problem.evaluate(points)
    batch = store.add_batch(proposal, points, log_r)
    logger.debug(f"Drew batch {len(store) - 1}: {batch.n_positive()}/{n} points hit the support of r")
    return batch
