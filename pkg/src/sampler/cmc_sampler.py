import logging

import numpy as np

from core.gaussian import std_normal_logpdf
from sampler.sampler_interface import SamplerInterface

# ロガーの取得
logger = logging.getLogger(__name__)


class CrudeMonteCarloSampler(SamplerInterface):
    """
    標準正規分布から直接サンプリングする粗いモンテカルロ法

    推定量は (1/n) Σ r(X_i)/φ(X_i)。r = φ·𝕀(故障) なら故障点の割合になる。

    Args:
        n: サンプル数
    """

    def __init__(self, n):
        if n < 1:
            raise ValueError(f"n must be at least 1 (got {n})")
        self.n = int(n)

    @property
    def name(self):
        return "cmc"

    def estimate(self, problem, rng):
        points = rng.standard_normal((self.n, problem.dim))
        log_r = problem.evaluate(points)
        ratios = np.zeros(self.n)
        hit = log_r > -np.inf
        ratios[hit] = np.exp(log_r[hit] - std_normal_logpdf(points[hit]))
        return float(np.sum(ratios)) / self.n

    def total_evaluations(self):
        return self.n
