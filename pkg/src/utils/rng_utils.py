"""
再現可能な乱数ストリームの生成

マスターシードからカウンタベース（Philox）のストリームを、(反復, t, 用途) などの
キーで分岐させる。キーが同じなら消費状態に関係なく同じストリームになる。
"""

import numpy as np

# 用途ごとのキー
PURPOSE_INITIAL_PROPOSAL = 0
PURPOSE_SAMPLING = 1
PURPOSE_MODEL_SELECTION = 2
PURPOSE_FINAL_BATCH = 3


def make_generator(seed, *keys):
    """
    シードとキーから numpy.random.Generator を作成する

    Args:
        seed: 64ビット整数のマスターシード
        keys: 分岐キー（非負整数）

    Returns:
        numpy.random.Generator
    """
    seed_seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seed_seq))


def child_generator(rng, *keys):
    """
    既存のGeneratorからキー付きの子ストリームを作成する

    親の消費状態には依存せず、親のシードとキーだけで決まる。
    """
    parent = rng.bit_generator.seed_seq
    seed_seq = np.random.SeedSequence(
        entropy=parent.entropy,
        spawn_key=tuple(parent.spawn_key) + tuple(int(k) for k in keys),
        pool_size=parent.pool_size,
    )
    return np.random.Generator(np.random.Philox(seed_seq))


def child_generators(rng, n):
    """キー 0..n−1 の子ストリームをまとめて作成する"""
    return [child_generator(rng, i) for i in range(n)]
