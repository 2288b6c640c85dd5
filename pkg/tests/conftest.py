import os
import sys

import numpy as np
import pytest

# src/ をインポートパスに追加
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from estimator.batch_store import BatchStore  # noqa: E402
from mixture.gmm import GmmParams, gmm_logpdf  # noqa: E402


@pytest.fixture
def unit_proposal():
    """2次元の標準正規（1成分）"""
    return GmmParams.from_arrays([1.0], [[0.0, 0.0]], [np.eye(2)])


@pytest.fixture
def weighted_store(unit_proposal):
    """
    指定した重みになるように log r を設定した点でストアを作るファクトリ

    使い方: weighted_store([(points, weights), ...])。各要素が1バッチになる。
    """

    def build(batches, proposal=unit_proposal):
        store = BatchStore(proposal.p)
        for points, weights in batches:
            points = np.asarray(points, dtype=float)
            weights = np.asarray(weights, dtype=float)
            log_r = np.full(points.shape[0], -np.inf)
            hit = weights > 0.0
            log_r[hit] = np.log(weights[hit]) + np.atleast_1d(gmm_logpdf(proposal, points[hit]))
            store.add_batch(proposal, points, log_r)
        return store

    return build


@pytest.fixture(autouse=True)
def no_thread_override(monkeypatch):
    """環境変数の並列数がテストに影響しないようにする"""
    monkeypatch.delenv("CIC_SAMPLER_THREADS", raising=False)
