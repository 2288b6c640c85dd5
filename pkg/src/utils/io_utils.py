import json
import logging
import os

import yaml

# ロガーの取得
logger = logging.getLogger(__name__)


def ensure_parent_dir(output_path):
    """出力先ディレクトリを作成する（存在しない場合）"""
    output_dir = os.path.dirname(output_path)
    if output_dir and not os.path.exists(output_dir):
        os.makedirs(output_dir)
        logger.info(f"Created output directory: {output_dir}")


def save_text(content, output_path):
    """
    テキストをLF改行・UTF-8でファイルに保存する

    Args:
        content: 保存する文字列
        output_path: 出力ファイルパス

    Returns:
        bool: 保存が成功したかどうか
    """
    try:
        ensure_parent_dir(output_path)
        with open(output_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        logger.info(f"Saved: {output_path}")
        return True
    except OSError as e:
        logger.error(f"Error saving file {output_path}: {e}")
        return False


def dump_json(data):
    """出力の再現性のためキーをソートしてJSONに変換する"""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def load_reference_table(reference_file):
    """
    参照結果のYAMLファイルを読み込む

    Args:
        reference_file: YAMLファイルのパス

    Returns:
        dict: 読み込まれた参照結果。読み込めない場合は空の辞書
    """
    try:
        with open(reference_file, "r", encoding="utf-8") as f:
            reference = yaml.safe_load(f) or {}
        logger.info(f"Successfully loaded reference results from {reference_file}")
        return reference
    except (OSError, yaml.YAMLError) as e:
        logger.warning(f"Failed to load reference results from {reference_file}: {e}")
        return {}
