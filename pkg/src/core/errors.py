"""
ライブラリ全体で使用する例外クラス
"""


class CicSamplerError(Exception):
    """
    このパッケージが送出する例外の基底クラス
    """


class ConfigurationError(CicSamplerError, ValueError):
    """設定値が不正"""


class DimensionMismatch(CicSamplerError, ValueError):
    """ベクトル・行列の次元が一致しない"""


class NotPositiveDefinite(CicSamplerError):
    """Cholesky分解に失敗した（正定値でない共分散）"""


class InvalidLogDensity(CicSamplerError, ValueError):
    """log r が NaN または +∞ を返した"""


class DegenerateComponent(CicSamplerError):
    """
    EMの更新で混合成分が退化した

    Args:
        component: 退化した成分のインデックス（不明な場合はNone）
        reason: 退化の理由
    """

    def __init__(self, reason, component=None):
        self.component = component
        self.reason = reason
        if component is None:
            super().__init__(reason)
        else:
            super().__init__(f"component {component}: {reason}")

    def __reduce__(self):
        return (type(self), (self.reason, self.component))


class EmptyRange(CicSamplerError):
    """バッチの範囲が空"""


class NoEffectiveSamples(CicSamplerError):
    """
    重みが正の点が1つもない

    Args:
        n_points: 範囲内の点の総数
        n_batches: 範囲内のバッチ数
    """

    def __init__(self, n_points=0, n_batches=0):
        self.n_points = n_points
        self.n_batches = n_batches
        super().__init__(
            f"no point with positive weight among {n_points} points in {n_batches} batches"
        )

    def __reduce__(self):
        return (type(self), (self.n_points, self.n_batches))


class InsufficientPoints(CicSamplerError):
    """初期化に必要な点の数が足りない"""


class GridExhausted(CicSamplerError):
    """kのグリッド探索が上限に達したが、完了したエントリがない"""


class TooManyAbortsError(CicSamplerError):
    """
    k_min=1 でもマルチスタートEMの大半が中断された（データが退化している）

    Args:
        k: 中断が多発した成分数
        n_aborted: 中断されたリスタート数
        n_restarts: リスタート総数
    """

    def __init__(self, k, n_aborted, n_restarts):
        self.k = k
        self.n_aborted = n_aborted
        self.n_restarts = n_restarts
        super().__init__(f"{n_aborted} of {n_restarts} EM restarts aborted at k={k}")

    def __reduce__(self):
        # プロセスプールから例外を受け取れるように引数を保持する
        return (type(self), (self.k, self.n_aborted, self.n_restarts))


class RepetitionFailure(CicSamplerError):
    """実験の反復のうち失敗した割合が許容値を超えた"""
