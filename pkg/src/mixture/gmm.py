import json
import logging

import numpy as np
from scipy.special import logsumexp

from core.errors import ConfigurationError, DimensionMismatch
from core.gaussian import mvn_logpdf
from core.linalg import SpdMatrix, cholesky

# ロガーの取得
logger = logging.getLogger(__name__)

# 混合重みの和に対する許容誤差
WEIGHT_SUM_TOLERANCE = 1e-12


class GmmParams:
    """
    ガウス混合モデルのパラメータ θ = (α, μ, Σ)

    不変オブジェクト。EMの各スイープは新しいインスタンスを返す。

    Args:
        weights: 長さkの混合重み（すべて正、和が1）
        means: (k, p) の平均
        covs: 長さkの SpdMatrix のリスト
    """

    __slots__ = ("_weights", "_means", "_covs")

    def __init__(self, weights, means, covs):
        weights = np.array(weights, dtype=float).reshape(-1)
        means = np.array(means, dtype=float)
        if means.ndim == 1:
            means = means.reshape(1, -1)
        covs = tuple(covs)

        k = weights.shape[0]
        if k < 1:
            raise ConfigurationError("a mixture needs at least one component")
        if means.shape[0] != k or len(covs) != k:
            raise DimensionMismatch(
                f"{k} weights, {means.shape[0]} means, {len(covs)} covariances"
            )
        if not all(isinstance(c, SpdMatrix) for c in covs):
            raise ConfigurationError("covariances must be SpdMatrix instances")
        p = means.shape[1]
        if any(c.dim != p for c in covs):
            raise DimensionMismatch("all components must share the same dimension")
        if not np.all(weights > 0.0):
            raise ConfigurationError(f"mixture weights must be positive: {weights}")
        if abs(np.sum(weights) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ConfigurationError(
                f"mixture weights must sum to 1 (got {np.sum(weights)!r})"
            )

        weights.setflags(write=False)
        means.setflags(write=False)
        self._weights = weights
        self._means = means
        self._covs = covs

    @classmethod
    def from_arrays(cls, weights, means, cov_matrices):
        """共分散を生の行列で受け取り、分解してから作成する"""
        return cls(weights, means, [cholesky(c) for c in cov_matrices])

    @property
    def k(self):
        return self._weights.shape[0]

    @property
    def p(self):
        return self._means.shape[1]

    @property
    def weights(self):
        return self._weights

    @property
    def means(self):
        return self._means

    @property
    def covs(self):
        return self._covs

    def components(self):
        """(重み, 平均, 共分散) の組を順に返す"""
        return zip(self._weights, self._means, self._covs)

    def to_dict(self):
        return {
            "k": self.k,
            "p": self.p,
            "weights": self._weights.tolist(),
            "means": self._means.tolist(),
            "covs": [c.to_list() for c in self._covs],
        }

    @classmethod
    def from_dict(cls, data):
        """to_dict() の出力（JSONドキュメント）から復元する"""
        params = cls.from_arrays(data["weights"], data["means"], data["covs"])
        if params.k != data.get("k", params.k) or params.p != data.get("p", params.p):
            raise DimensionMismatch("k/p fields disagree with the stored arrays")
        return params

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, GmmParams):
            return NotImplemented
        return (
            np.array_equal(self._weights, other._weights)
            and np.array_equal(self._means, other._means)
            and all(a == b for a, b in zip(self._covs, other._covs))
        )

    def __hash__(self):
        return hash((self._weights.tobytes(), self._means.tobytes()))

    def __repr__(self):
        return f"GmmParams(k={self.k}, p={self.p}, weights={self._weights.tolist()})"


def component_logpdfs(params, x):
    """
    各成分の log α_j + log q_j(x) を計算する

    Args:
        params: GmmParams
        x: (n, p) の配列

    Returns:
        np.ndarray: (n, k) の配列
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty((x.shape[0], params.k))
    log_weights = np.log(params.weights)
    for j, (mean, cov) in enumerate(zip(params.means, params.covs)):
        out[:, j] = log_weights[j] + mvn_logpdf(x, mean, cov)
    return out


def gmm_logpdf(params, x):
    """
    混合密度の対数 log Σ_j α_j q_j(x) を log-sum-exp で計算する

    Args:
        params: GmmParams
        x: p次元ベクトル、または (n, p) の配列

    Returns:
        float | np.ndarray: xが1点ならスカラー、(n, p) なら長さnの配列
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (params.p,) or x.ndim > 2:
        raise DimensionMismatch(f"x shape {x.shape} for a mixture of dimension {params.p}")
    values = logsumexp(component_logpdfs(params, x), axis=1)
    if x.ndim == 1:
        return float(values[0])
    return values


def gmm_sample(rng, params, size=None):
    """
    混合分布からサンプリングする

    成分インデックスを α_j の確率で選び、その成分の正規分布から生成する。

    Args:
        rng: numpy.random.Generator
        params: GmmParams
        size: サンプル数。Noneの場合は1点を返す

    Returns:
        np.ndarray: 形状 (p,) または (size, p)
    """
    n = 1 if size is None else int(size)
    labels = rng.choice(params.k, size=n, p=params.weights)
    z = rng.standard_normal((n, params.p))
    points = np.empty((n, params.p))
    for j, (mean, cov) in enumerate(zip(params.means, params.covs)):
        mask = labels == j
        if np.any(mask):
            points[mask] = mean + z[mask] @ cov.chol.T
    if size is None:
        return points[0]
    return points


def free_param_dimension(k, p):
    """
    k成分・p次元のGMMの自由パラメータ数 d = (k−1) + k(p + p(p+1)/2)
    """
    if k < 1 or p < 1:
        raise ConfigurationError(f"k and p must be positive (k={k}, p={p})")
    return (k - 1) + k * (p + p * (p + 1) // 2)


def save_params(params, output_path):
    """GmmParams をJSONファイルに保存する"""
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(params.to_json())
        f.write("\n")
    logger.info(f"Mixture parameters saved to: {output_path}")


def load_params(input_path):
    """save_params() で保存したJSONファイルを読み込む"""
    with open(input_path, "r", encoding="utf-8") as f:
        return GmmParams.from_json(f.read())
