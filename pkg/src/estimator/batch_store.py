import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from core.errors import DimensionMismatch, EmptyRange, InvalidLogDensity
from mixture.gmm import gmm_logpdf

# ロガーの取得
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightedPoint:
    """
    重み付きサンプル点

    Attributes:
        x: サンプル点（p次元）
        r_value: r(x) の値（非負）
        log_proposal: 生成した提案分布での log q(x)
        weight: 重要度重み r(x)/q(x)
    """

    x: np.ndarray
    r_value: float
    log_proposal: float
    weight: float


def importance_weights(log_r, log_proposal):
    """
    重要度重み exp(log r − log q) を計算する。r=0（log r = −∞）の点は重み0

    Args:
        log_r: 長さnの log r(x)
        log_proposal: 長さnの log q(x)

    Returns:
        np.ndarray: 長さnの重み

    Raises:
        InvalidLogDensity: log r に NaN または +∞ が含まれる
    """
    log_r = np.asarray(log_r, dtype=float)
    log_proposal = np.asarray(log_proposal, dtype=float)
    invalid = np.isnan(log_r) | (log_r == np.inf)
    if np.any(invalid):
        raise InvalidLogDensity(
            f"log r is NaN or +inf at {int(np.count_nonzero(invalid))} of {log_r.shape[0]} points"
        )
    weights = np.zeros_like(log_r)
    hit = log_r > -np.inf
    weights[hit] = np.exp(log_r[hit] - log_proposal[hit])
    return weights


class Batch:
    """
    1回の反復で提案分布から生成した点とその重み

    Args:
        proposal: 点を生成した提案分布（GmmParams）
        points: (n, p) のサンプル点
        log_r: 長さnの log r(x)（r(x)=0 の点は −∞）
    """

    def __init__(self, proposal, points, log_r):
        points = np.array(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != proposal.p:
            raise DimensionMismatch(
                f"points shape {points.shape} for a proposal of dimension {proposal.p}"
            )
        log_r = np.array(log_r, dtype=float).reshape(-1)
        if log_r.shape[0] != points.shape[0]:
            raise DimensionMismatch(f"{points.shape[0]} points but {log_r.shape[0]} log_r values")

        log_proposal = np.atleast_1d(gmm_logpdf(proposal, points))
        weights = importance_weights(log_r, log_proposal)
        for arr in (points, log_r, log_proposal, weights):
            arr.setflags(write=False)

        self.proposal = proposal
        self.points = points
        self.log_r = log_r
        self.log_proposal = log_proposal
        self.weights = weights

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def r_values(self):
        return np.exp(self.log_r)

    def n_positive(self):
        return int(np.count_nonzero(self.weights > 0.0))

    def point(self, i):
        """i番目の点を WeightedPoint として返す"""
        return WeightedPoint(
            x=self.points[i],
            r_value=float(np.exp(self.log_r[i])),
            log_proposal=float(self.log_proposal[i]),
            weight=float(self.weights[i]),
        )

    def __iter__(self):
        for i in range(self.size):
            yield self.point(i)

    def to_dataframe(self):
        """x_1..x_p, r_value, log_proposal, weight 列のDataFrameに変換する"""
        df = pd.DataFrame(
            self.points, columns=[f"x_{j + 1}" for j in range(self.points.shape[1])]
        )
        df["r_value"] = self.r_values
        df["log_proposal"] = self.log_proposal
        df["weight"] = self.weights
        return df


class BatchStore:
    """
    反復ごとのバッチを保持する追記専用ストア

    累積推定量はこのストアの連続したバッチ範囲（range）を対象に計算する。

    Args:
        p: 次元
    """

    def __init__(self, p):
        self.p = p
        self._batches = []

    def add_batch(self, proposal, points, log_r):
        """
        新しいバッチを重み付けして追加する

        Returns:
            Batch: 追加したバッチ
        """
        if proposal.p != self.p:
            raise DimensionMismatch(f"proposal dimension {proposal.p} != store dimension {self.p}")
        batch = Batch(proposal, points, log_r)
        self._batches.append(batch)
        logger.debug(
            f"Stored batch {len(self._batches) - 1}: {batch.size} points, "
            f"{batch.n_positive()} with positive weight"
        )
        return batch

    def __len__(self):
        return len(self._batches)

    def __iter__(self):
        return iter(self._batches)

    def batch(self, s):
        return self._batches[s]

    def resolve(self, batch_range):
        """
        バッチ範囲をバッチのリストに変換する

        Raises:
            EmptyRange: 範囲が空
            IndexError: 範囲がストアの外を指している
        """
        indices = list(batch_range)
        if not indices:
            raise EmptyRange(f"batch range {batch_range} is empty")
        for s in indices:
            if s < 0 or s >= len(self._batches):
                raise IndexError(f"batch {s} does not exist (store has {len(self._batches)})")
        return [self._batches[s] for s in indices]

    def total_size(self, batch_range):
        """範囲内の点の総数 Σ n_s（重み0の点も含む）"""
        return sum(b.size for b in self.resolve(batch_range))

    def gather(self, batch_range):
        """
        範囲内の点と重みを連結して返す

        Returns:
            tuple: ((N, p) の点, 長さNの重み)
        """
        batches = self.resolve(batch_range)
        points = np.concatenate([b.points for b in batches], axis=0)
        weights = np.concatenate([b.weights for b in batches])
        return points, weights

    def save_batch_csv(self, s, output_path):
        """
        バッチをCSVファイルに保存する

        Returns:
            bool: 保存が成功したかどうか
        """
        try:
            output_dir = os.path.dirname(output_path)
            if output_dir and not os.path.exists(output_dir):
                os.makedirs(output_dir)
            self.batch(s).to_dataframe().to_csv(output_path, index=False, lineterminator="\n")
            logger.info(f"Batch {s} saved to: {output_path}")
            return True
        except Exception as e:
            logger.error(f"Error saving batch {s} to {output_path}: {e}")
            return False
