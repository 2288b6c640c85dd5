import abc
import logging

logger = logging.getLogger(__name__)


class SamplerInterface(abc.ABC):
    """
    正規化定数 ρ = ∫ r dμ を推定する手法のインターフェイス

    実装は実験の反復をプロセスプールで実行できるよう pickle 可能にする。
    """

    @property
    @abc.abstractmethod
    def name(self):
        """
        手法名（CSVの method 列に出力される）

        Returns:
            str: 手法名
        """
        pass

    @abc.abstractmethod
    def estimate(self, problem, rng):
        """
        ρ を1回推定する

        Args:
            problem: 推定対象の Problem
            rng: numpy.random.Generator

        Returns:
            float: ρの推定値
        """
        pass

    @abc.abstractmethod
    def total_evaluations(self):
        """
        1回の推定で r を評価する回数

        Returns:
            int: 評価回数
        """
        pass
