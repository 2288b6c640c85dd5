import concurrent.futures
import logging
import os
import time

# ロガーの取得
logger = logging.getLogger(__name__)

# 並列数を指定する環境変数（--threads より優先）
THREADS_ENV = "CIC_SAMPLER_THREADS"


def resolve_workers(requested=None):
    """
    ワーカー数を決定する

    環境変数 CIC_SAMPLER_THREADS があればそれを優先し、なければ引数、
    どちらもなければマシンのCPU数を使う。
    """
    env_value = os.getenv(THREADS_ENV)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logger.warning(f"Ignoring invalid {THREADS_ENV}={env_value!r}")
    if requested:
        return max(1, int(requested))
    return max(1, os.cpu_count() or 1)


def run_in_parallel(func, jobs, max_workers=1, use_processes=False, capture_errors=False, label="job"):
    """
    ジョブを並列処理し、投入順に並べた結果を返す

    Args:
        func: 各ジョブを処理する関数（プロセス実行の場合はモジュールレベル関数）
        jobs: 引数タプルのリスト
        max_workers: ワーカー数。1以下の場合はプール無しで順に実行する
        use_processes: Trueならプロセスプール、Falseならスレッドプール
        capture_errors: Trueなら例外を結果として返し、Falseなら送出する
        label: ログ用の名前

    Returns:
        list: jobsと同じ順序の結果（capture_errors時は失敗したジョブの位置に例外）
    """
    start_time = time.time()
    job_count = len(jobs)

    if max_workers <= 1 or job_count <= 1:
        results = []
        for i, job in enumerate(jobs):
            try:
                results.append(func(*job))
            except Exception as e:
                if not capture_errors:
                    raise
                logger.error(f"Error processing {label} {i}: {e!r}")
                results.append(e)
        return results

    logger.debug(f"Processing {job_count} {label}s in parallel using {max_workers} workers")
    executor_cls = (
        concurrent.futures.ProcessPoolExecutor
        if use_processes
        else concurrent.futures.ThreadPoolExecutor
    )

    indexed_results = []
    with executor_cls(max_workers=max_workers) as executor:
        future_to_index = {executor.submit(func, *job): i for i, job in enumerate(jobs)}

        # 完了したものから結果を取得
        for future in concurrent.futures.as_completed(future_to_index):
            index = future_to_index[future]
            try:
                indexed_results.append((index, future.result()))
            except Exception as e:
                if not capture_errors:
                    for pending in future_to_index:
                        pending.cancel()
                    raise
                logger.error(f"Error processing {label} {index}: {e!r}")
                indexed_results.append((index, e))

    # インデックスでソートして投入順を維持
    indexed_results.sort(key=lambda x: x[0])
    elapsed = time.time() - start_time
    logger.debug(f"Parallel processing completed in {elapsed:.2f}s for {job_count} {label}s")
    return [result for _, result in indexed_results]
