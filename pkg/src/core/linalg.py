import logging

import numpy as np
import scipy.linalg

from core.errors import DimensionMismatch, NotPositiveDefinite

# ロガーの取得
logger = logging.getLogger(__name__)

# 対称性の許容誤差（絶対値）
SYMMETRY_TOLERANCE = 1e-12


class SpdMatrix:
    """
    対称正定値行列とそのCholesky因子（下三角）を保持する不変オブジェクト

    直接インスタンス化せず、cholesky() を使って作成する。
    """

    __slots__ = ("_matrix", "_chol")

    def __init__(self, matrix, chol):
        matrix = np.array(matrix, dtype=float)
        chol = np.array(chol, dtype=float)
        matrix.setflags(write=False)
        chol.setflags(write=False)
        self._matrix = matrix
        self._chol = chol

    @property
    def dim(self):
        return self._matrix.shape[0]

    @property
    def matrix(self):
        return self._matrix

    @property
    def chol(self):
        return self._chol

    def log_det(self):
        """log|Σ| = 2 Σ log L_ii"""
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def trace(self):
        return float(np.trace(self._matrix))

    def to_list(self):
        return self._matrix.tolist()

    def __eq__(self, other):
        if not isinstance(other, SpdMatrix):
            return NotImplemented
        return np.array_equal(self._matrix, other._matrix)

    def __hash__(self):
        return hash(self._matrix.tobytes())

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim}, matrix={self._matrix.tolist()})"


def cholesky(matrix):
    """
    対称行列をCholesky分解して SpdMatrix を作成する

    入力は (M + Mᵀ)/2 で対称化してから分解する。

    Args:
        matrix: p×p の実対称行列

    Returns:
        SpdMatrix: 分解済みの行列

    Raises:
        DimensionMismatch: 正方行列でない、または対称性の許容誤差を超えている
        NotPositiveDefinite: 分解に失敗した（ピボットが正でない）
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefinite("matrix has non-finite entries")

    asymmetry = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asymmetry > SYMMETRY_TOLERANCE * max(1.0, np.max(np.abs(m))):
        raise DimensionMismatch(f"matrix is not symmetric (max deviation {asymmetry:.3e})")
    m = 0.5 * (m + m.T)

    try:
        chol = scipy.linalg.cholesky(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"cholesky factorization failed: {e}") from e

    # 対角はすべて正
    if not np.all(np.diag(chol) > 0.0):
        raise NotPositiveDefinite("cholesky factor has non-positive pivots")
    return SpdMatrix(m, chol)


def scaled_identity(p, scale):
    """scale·I を SpdMatrix として作成する"""
    return cholesky(scale * np.eye(p))


def eigenvalues(cov):
    """対称固有値分解による固有値（昇順）。SpdMatrix と分解前の配列のどちらも受け付ける"""
    matrix = cov.matrix if isinstance(cov, SpdMatrix) else np.asarray(cov, dtype=float)
    return scipy.linalg.eigvalsh(matrix, check_finite=False)


def condition_number(cov):
    """
    共分散の条件数（最大固有値 / 最小固有値）を計算する

    Args:
        cov: SpdMatrix

    Returns:
        float: 条件数。最小固有値が数値的に0以下の場合は inf
    """
    if cov.dim == 2:
        # 2×2 対称行列は固有値を閉形式で求める
        a, b = cov.matrix[0, 0], cov.matrix[0, 1]
        d = cov.matrix[1, 1]
        half_trace = 0.5 * (a + d)
        radius = np.hypot(0.5 * (a - d), b)
        lam_max = half_trace + radius
        # 打ち消しを避けるため、最小固有値は det / lam_max から求める
        lam_min = (a * d - b * b) / lam_max
    else:
        lam = eigenvalues(cov)
        lam_min, lam_max = lam[0], lam[-1]
    if lam_min <= 0.0:
        return float("inf")
    return float(lam_max / lam_min)
