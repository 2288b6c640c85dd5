"""
ユーティリティ関数パッケージ
"""

from .logging_config import setup_logging
from .io_utils import dump_json, ensure_parent_dir, load_reference_table, save_text
from .parallel_utils import resolve_workers, run_in_parallel
from .rng_utils import child_generator, child_generators, make_generator

__all__ = [
    "setup_logging",
    "dump_json",
    "ensure_parent_dir",
    "load_reference_table",
    "save_text",
    "resolve_workers",
    "run_in_parallel",
    "child_generator",
    "child_generators",
    "make_generator",
]
