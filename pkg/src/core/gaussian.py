import logging
import math

import numpy as np
import scipy.linalg
import scipy.special

from core.errors import DimensionMismatch

# ロガーの取得
logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


def mvn_logpdf(x, mean, cov):
    """
    多変量正規分布の対数密度を計算する

    逆行列は使わず、Cholesky因子による三角方程式の解で二次形式を求める。

    Args:
        x: p次元ベクトル、または (n, p) の配列
        mean: p次元の平均ベクトル
        cov: 共分散（SpdMatrix）

    Returns:
        float | np.ndarray: xが1点ならスカラー、(n, p) なら長さnの配列
    """
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    p = cov.dim
    if mean.shape != (p,) or x.shape[-1:] != (p,) or x.ndim > 2:
        raise DimensionMismatch(
            f"x shape {x.shape}, mean shape {mean.shape}, cov dim {p}"
        )

    diff = np.atleast_2d(x) - mean
    solved = scipy.linalg.solve_triangular(
        cov.chol, diff.T, lower=True, check_finite=False
    )
    quad = np.sum(solved * solved, axis=0)
    log_norm = -0.5 * p * LOG_2PI - np.sum(np.log(np.diag(cov.chol)))
    values = log_norm - 0.5 * quad
    if x.ndim == 1:
        return float(values[0])
    return values


def mvn_sample(rng, mean, cov, size=None):
    """
    多変量正規分布からサンプリングする（μ + Lz）

    Args:
        rng: numpy.random.Generator
        mean: p次元の平均ベクトル
        cov: 共分散（SpdMatrix）
        size: サンプル数。Noneの場合は1点を返す

    Returns:
        np.ndarray: 形状 (p,) または (size, p)
    """
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (cov.dim,):
        raise DimensionMismatch(f"mean shape {mean.shape}, cov dim {cov.dim}")
    if size is None:
        z = rng.standard_normal(cov.dim)
        return mean + cov.chol @ z
    z = rng.standard_normal((size, cov.dim))
    return mean + z @ cov.chol.T


def std_normal_cdf(z):
    """
    標準正規分布の累積分布関数 Φ(z)

    Φ(z) = erfc(−z/√2)/2 で計算するため、左裾でも相対精度が落ちない。
    """
    return 0.5 * scipy.special.erfc(-np.asarray(z, dtype=float) / math.sqrt(2.0))


def std_normal_logpdf(x):
    """独立な標準正規の同時対数密度（最後の軸で和をとる）"""
    x = np.asarray(x, dtype=float)
    return -0.5 * x.shape[-1] * LOG_2PI - 0.5 * np.sum(x * x, axis=-1)
