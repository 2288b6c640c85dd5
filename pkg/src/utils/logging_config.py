import logging
import os

# ログレベルを指定する環境変数
LOG_LEVEL_ENV = "CIC_SAMPLER_LOG_LEVEL"


def setup_logging(level=None):
    """
    プロジェクト全体で使用する共通のロギング設定

    Args:
        level: ロギングレベル。Noneの場合は環境変数 CIC_SAMPLER_LOG_LEVEL（既定はINFO）

    Returns:
        logging.Logger: 設定済みロガー
    """
    if level is None:
        level_name = os.getenv(LOG_LEVEL_ENV, "INFO").upper()
        level = getattr(logging, level_name, logging.INFO)

    # ロギング設定が複数回実行されることを防ぐ
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=level,
            format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    else:
        logging.getLogger().setLevel(level)

    return logging.getLogger(__name__)


# デフォルトロガーを設定
logger = logging.getLogger(__name__)
