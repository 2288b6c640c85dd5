import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from core.errors import ConfigurationError
from core.gaussian import std_normal_cdf, std_normal_logpdf
from mixture.gmm import gmm_logpdf
from sampler.ce_ais_gm_sampler import ce_ais_gm_estimate
from sampler.cmc_sampler import CrudeMonteCarloSampler
from sampler.problem import Problem

# ロガーの取得
logger = logging.getLogger(__name__)

# x1 の積分範囲（この外側の寄与は無視できる）
QUADRATURE_HALF_WIDTH = 10.0
QUADRATURE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ParabolicLimitState:
    """
    放物線状の限界状態関数 g(x) = b − x2 − κ(x1 − e)²。g(x) ≤ 0 で故障

    Attributes:
        b: 故障の閾値
        kappa: 曲率（正）
        e: 頂点のx1座標
    """

    b: float
    kappa: float = 0.1
    e: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ConfigurationError(f"kappa must be positive (got {self.kappa})")

    def describe(self):
        return f"parabolic limit state b={self.b}, kappa={self.kappa}, e={self.e}"


def limit_state_g(ls, x):
    """
    限界状態関数の値

    Args:
        ls: ParabolicLimitState
        x: 2次元ベクトル、または (n, 2) の配列

    Returns:
        float | np.ndarray: g(x)
    """
    x = np.asarray(x, dtype=float)
    g = ls.b - x[..., 1] - ls.kappa * (x[..., 0] - ls.e) ** 2
    if x.ndim == 1:
        return float(g)
    return g


def parabolic_log_r(ls, x):
    """
    log r(x) = log φ₂(x)（g(x) ≤ 0 のとき）、それ以外は −∞
    """
    x = np.asarray(x, dtype=float)
    points = np.atleast_2d(x)
    g = limit_state_g(ls, points)
    log_r = np.full(points.shape[0], -np.inf)
    failed = g <= 0.0
    log_r[failed] = std_normal_logpdf(points[failed])
    if x.ndim == 1:
        return float(log_r[0])
    return log_r


def make_problem(ls):
    """
    r(x) = φ(x)·𝕀(g(x) ≤ 0) を Problem として作成する
    """
    return Problem(
        dim=2,
        log_r=functools.partial(parabolic_log_r, ls),
        description=ls.describe(),
        vectorized=True,
    )


def true_rho_oracle(ls):
    """
    故障確率 ρ = ∫ φ(x1)(1 − Φ(b − κ(x1−e)²)) dx1 を適応求積で計算する

    X2 が標準正規なので、故障 ⇔ x2 ≥ b − κ(x1−e)² と1次元に帰着できる。
    """

    def integrand(x1):
        threshold = ls.b - ls.kappa * (x1 - ls.e) ** 2
        return math.exp(-0.5 * x1 * x1) / math.sqrt(2.0 * math.pi) * float(std_normal_cdf(-threshold))

    value, abserr = scipy.integrate.quad(
        integrand,
        -QUADRATURE_HALF_WIDTH,
        QUADRATURE_HALF_WIDTH,
        epsabs=QUADRATURE_TOLERANCE,
        epsrel=QUADRATURE_TOLERANCE,
        limit=500,
    )
    logger.debug(f"Oracle for {ls.describe()}: {value!r} (estimated error {abserr:.1e})")
    return value


def failure_probability(ls, params):
    """
    2次元GMM q_θ のもとでの故障確率 P_q(g(X) ≤ 0) を求積で計算する

    各成分について x1 の周辺分布で積分し、x2 は x1 を条件とした正規分布で扱う。
    """
    total = 0.0
    for alpha, mean, cov in params.components():
        s11, s12, s22 = cov.matrix[0, 0], cov.matrix[0, 1], cov.matrix[1, 1]
        sd1 = math.sqrt(s11)
        cond_sd = math.sqrt(max(s22 - s12 * s12 / s11, 0.0))

        def integrand(x1, mean=mean, s11=s11, s12=s12, sd1=sd1, cond_sd=cond_sd):
            density = math.exp(-0.5 * ((x1 - mean[0]) / sd1) ** 2) / (sd1 * math.sqrt(2.0 * math.pi))
            threshold = ls.b - ls.kappa * (x1 - ls.e) ** 2
            cond_mean = mean[1] + s12 / s11 * (x1 - mean[0])
            return density * float(std_normal_cdf((cond_mean - threshold) / cond_sd))

        value, _ = scipy.integrate.quad(
            integrand, mean[0] - 12.0 * sd1, mean[0] + 12.0 * sd1, epsabs=1e-12, epsrel=1e-10, limit=500
        )
        total += alpha * value
    return total


def cross_entropy_oracle(ls, theta):
    """
    C(θ) = −∫ r log q_θ dμ を2次元の求積で計算する
    """

    def integrand(x2, x1):
        x = np.array([x1, x2])
        return -math.exp(float(std_normal_logpdf(x))) * gmm_logpdf(theta, x)

    value, _ = scipy.integrate.dblquad(
        integrand,
        -QUADRATURE_HALF_WIDTH,
        QUADRATURE_HALF_WIDTH,
        lambda x1: max(-QUADRATURE_HALF_WIDTH, ls.b - ls.kappa * (x1 - ls.e) ** 2),
        QUADRATURE_HALF_WIDTH,
        epsabs=1e-11,
        epsrel=1e-10,
    )
    return value


def run_cmc(ls, n, rng):
    """
    粗いモンテカルロ推定量：標準正規のn点のうち g ≤ 0 となる割合
    """
    return CrudeMonteCarloSampler(n).estimate(make_problem(ls), rng)


def run_ce_ais_gm(ls, config, rng):
    """
    成分数固定の比較手法で故障確率を推定する

    Args:
        ls: ParabolicLimitState
        config: CeAisGmConfig
        rng: numpy.random.Generator

    Returns:
        float: ρの推定値
    """
    return ce_ais_gm_estimate(make_problem(ls), config, rng)
