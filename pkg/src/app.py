import argparse
import math
import os
import sys
from dataclasses import asdict

# プロジェクトのルートディレクトリをPYTHONPATHに追加
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from dotenv import load_dotenv

from benchmark.experiment import (
    METHOD_CE_AIS_GM,
    METHOD_CIC_IS,
    METHOD_CMC,
    METHOD_CMC_ANALYTIC,
    analytic_cmc_summary,
    compare_with_reference,
    run_experiment,
    summaries_to_dataframe,
    write_summary_csv,
)
from benchmark.parabolic import ParabolicLimitState, failure_probability, make_problem, true_rho_oracle
from core.errors import CicSamplerError, ConfigurationError
from em.weighted_em import EmConfig
from estimator.batch_store import BatchStore
from mixture.gmm import load_params, save_params
from sampler.ce_ais_gm_sampler import CeAisGmConfig, CeAisGmSampler
from sampler.cic_sampler import CicImportanceSampler, PipelineConfig, run_cic_is
from sampler.cmc_sampler import CrudeMonteCarloSampler
from sampler.problem import default_batch_sizes, default_initial_proposal, draw_batch
from selection.cic import cic_rho_hat, select_model_order, write_trace_csv
from utils.io_utils import dump_json, ensure_parent_dir, load_reference_table, save_text
from utils.logging_config import setup_logging
from utils.parallel_utils import resolve_workers
from utils.rng_utils import PURPOSE_INITIAL_PROPOSAL, PURPOSE_MODEL_SELECTION, PURPOSE_SAMPLING, child_generator, make_generator

# 環境変数の読み込み
load_dotenv()

# ロギング設定
logger = setup_logging()

# サポートされている問題
SUPPORTED_PROBLEMS = ["parabolic"]

# 表1の設定
DEFAULT_B_LIST = [1.5, 2.0, 2.5]
DEFAULT_METHODS = [METHOD_CIC_IS, METHOD_CE_AIS_GM, METHOD_CMC_ANALYTIC]
SUPPORTED_METHODS = [METHOD_CIC_IS, METHOD_CE_AIS_GM, METHOD_CMC, METHOD_CMC_ANALYTIC]

# この反復数未満の実験は低精度としてヘッダに注記する
LOW_PRECISION_REPETITIONS = 100

# 参照結果ファイル（環境変数で上書き可能）
REFERENCE_FILE = os.getenv(
    "CIC_SAMPLER_REFERENCE_FILE",
    os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "reference_results.yaml"),
)


def parse_float_list(text):
    """カンマ区切りの数値リストを解析する"""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def parse_seed(text):
    """マスターシードを解析する（0以上の整数）"""
    try:
        seed = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    if seed < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative (got {seed})")
    return seed


def parse_method_list(text):
    """カンマ区切りの手法名リストを解析する"""
    methods = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in methods if m not in SUPPORTED_METHODS]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown methods {unknown}; supported: {', '.join(SUPPORTED_METHODS)}"
        )
    return methods


def b_values(args):
    """--b と --b-list から閾値のリストを作る"""
    if getattr(args, "b_list", None):
        return args.b_list
    if getattr(args, "b", None) is not None:
        return [args.b]
    return list(DEFAULT_B_LIST)


def limit_state(args, b):
    return ParabolicLimitState(b=b, kappa=args.kappa, e=args.e)


def pipeline_config(args, workers=1):
    """コマンドライン引数から PipelineConfig を作成する"""
    initial_proposal = None
    if getattr(args, "initial_proposal", None):
        try:
            initial_proposal = load_params(args.initial_proposal)
        except (OSError, ValueError) as e:
            raise ConfigurationError(f"cannot load initial proposal from {args.initial_proposal}: {e}") from e
        logger.info(f"Loaded initial proposal with k={initial_proposal.k} from: {args.initial_proposal}")
    return PipelineConfig(
        initial_proposal=initial_proposal,
        tau=args.tau,
        batch_sizes=default_batch_sizes(args.tau, args.batch_size, args.final_batch_size),
        em=EmConfig(workers=workers),
        master_seed=args.seed,
    )


def cmd_run(args):
    """
    1回のCIC-ISを実行し、結果JSONとCICトレースCSVを書き出す

    Returns:
        int: 終了ステータス
    """
    workers = resolve_workers(args.threads)
    config = pipeline_config(args, workers)
    ls = limit_state(args, args.b)
    logger.info(f"Running CIC-IS on {ls.describe()} (seed={args.seed}, batch sizes={list(config.batch_sizes)})")

    result = run_cic_is(make_problem(ls), config, make_generator(args.seed))

    output_dir = args.output or "cic_run"
    header = [f"seed={args.seed}", ls.describe()]
    result_path = os.path.join(output_dir, "result.json")
    trace_path = os.path.join(output_dir, "cic_trace.csv")
    ensure_parent_dir(trace_path)
    if not result.save_json(result_path, master_seed=args.seed):
        return 1
    write_trace_csv(result.traces, trace_path, header_lines=header)
    # 最終の提案分布は --initial-proposal でそのまま再利用できる
    save_params(result.final_params, os.path.join(output_dir, "proposal.json"))

    # CSV形式では各バッチも書き出す
    if args.format == "csv":
        for s in range(len(result.store)):
            result.store.save_batch_csv(s, os.path.join(output_dir, f"batch_{s}.csv"))

    print(f"rho_hat={result.rho_hat_final:.12g}")
    print(f"k_history={','.join(str(k) for k in result.k_history)}")
    print(f"proposal_failure_mass={failure_probability(ls, result.final_params):.6g}")
    return 0


def build_methods(methods, args):
    """手法名から SamplerInterface の実装を作成する（cmc-analytic は除く）"""
    batch_sizes = default_batch_sizes(args.tau, args.batch_size, args.final_batch_size)
    samplers = []
    for method in methods:
        if method == METHOD_CIC_IS:
            samplers.append(
                CicImportanceSampler(PipelineConfig(tau=args.tau, batch_sizes=batch_sizes, master_seed=args.seed))
            )
        elif method == METHOD_CE_AIS_GM:
            samplers.append(CeAisGmSampler(CeAisGmConfig(tau=args.tau, batch_sizes=batch_sizes)))
        elif method == METHOD_CMC:
            samplers.append(CrudeMonteCarloSampler(sum(batch_sizes)))
    return samplers


def cmd_benchmark(args):
    """
    閾値bごとに実験を繰り返し、表1の形式の集計CSV（またはJSON）を書き出す

    Returns:
        int: 終了ステータス
    """
    workers = resolve_workers(args.threads)
    methods = args.methods or list(DEFAULT_METHODS)
    samplers = build_methods(methods, args)
    n_total = sum(default_batch_sizes(args.tau, args.batch_size, args.final_batch_size))

    summaries = []
    for b in b_values(args):
        ls = limit_state(args, b)
        rows = run_experiment(ls, samplers, args.repetitions, args.seed, workers=workers) if samplers else []
        if METHOD_CMC_ANALYTIC in methods:
            cic_rows = [s for s in rows if s.method == METHOD_CIC_IS]
            rho_bar = cic_rows[0].mean if cic_rows else true_rho_oracle(ls)
            rows.append(analytic_cmc_summary(rho_bar, n_total, args.repetitions, b=b))
        # 表1と同じく手法名の順に並べる
        order = {m: i for i, m in enumerate(methods)}
        summaries.extend(sorted(rows, key=lambda s: order.get(s.method, len(order))))

    header = [
        f"seed={args.seed}",
        f"repetitions={args.repetitions}",
        f"kappa={args.kappa} e={args.e}",
    ]
    if args.repetitions < LOW_PRECISION_REPETITIONS:
        header.append(f"low-precision: fewer than {LOW_PRECISION_REPETITIONS} repetitions")

    if args.format == "json":
        output_path = args.output or "benchmark.json"
        records = [
            {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(s).items()}
            for s in summaries
        ]
        payload = {"seed": args.seed, "repetitions": args.repetitions, "header": header, "rows": records}
        if not save_text(dump_json(payload), output_path):
            return 1
    else:
        output_path = args.output or "benchmark.csv"
        ensure_parent_dir(output_path)
        write_summary_csv(summaries, output_path, header_lines=header)

    compare_with_reference(summaries, load_reference_table(REFERENCE_FILE))
    print(summaries_to_dataframe(summaries).to_markdown(index=False))
    return 0


def cmd_select(args):
    """
    初期提案分布からバッチ0を生成し、t=1 の成分数のグリッド探索を1回行う

    Returns:
        int: 終了ステータス
    """
    workers = resolve_workers(args.threads)
    ls = limit_state(args, args.b)
    problem = make_problem(ls)
    rng = make_generator(args.seed)

    store = BatchStore(problem.dim)
    proposal = default_initial_proposal(problem.dim, child_generator(rng, 0, PURPOSE_INITIAL_PROPOSAL))
    batch = draw_batch(problem, store, proposal, args.batch_size, child_generator(rng, 1, PURPOSE_SAMPLING))
    logger.info(f"Batch 0: {batch.n_positive()} of {batch.size} points hit the failure region")

    trace = select_model_order(
        store,
        range(0, 1),
        cic_rho_hat(store, 1),
        1,
        EmConfig(workers=workers),
        child_generator(rng, 1, PURPOSE_MODEL_SELECTION),
        t=1,
    )
    output_path = args.output or "cic_select.csv"
    ensure_parent_dir(output_path)
    write_trace_csv([trace], output_path, header_lines=[f"seed={args.seed}", ls.describe()])
    print(f"chosen_k={trace.chosen_k}")
    return 0


def cmd_oracle(args):
    """
    求積による故障確率の真値を b ごとに出力する

    Returns:
        int: 終了ステータス
    """
    for b in b_values(args):
        print(f"{b:g},{true_rho_oracle(limit_state(args, b)):.12g}")
    return 0


def add_problem_arguments(parser, require_b=False):
    parser.add_argument(
        "--problem",
        choices=SUPPORTED_PROBLEMS,
        default="parabolic",
        help="Target problem (default: parabolic)",
    )
    parser.add_argument("--b", type=float, required=require_b, help="Failure threshold b of the limit state")
    parser.add_argument("--kappa", type=float, default=0.1, help="Curvature of the limit state (default: 0.1)")
    parser.add_argument("--e", type=float, default=0.0, help="Vertex offset of the limit state (default: 0)")


def add_sampling_arguments(parser):
    parser.add_argument("--tau", type=int, default=7, help="Number of adaptive iterations (default: 7)")
    parser.add_argument("--batch-size", type=int, default=1000, help="Batch size n_t for t < tau (default: 1000)")
    parser.add_argument(
        "--final-batch-size", type=int, default=1700, help="Size of the final estimation batch (default: 1700)"
    )


def add_common_arguments(parser, formats=("csv", "json"), default_format="csv"):
    parser.add_argument("--seed", type=parse_seed, default=0, help="Master seed (default: 0)")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Number of parallel workers (default: machine parallelism; CIC_SAMPLER_THREADS overrides)",
    )
    parser.add_argument("-o", "--output", help="Output path")
    parser.add_argument("--format", choices=formats, default=default_format, help="Output format")


def build_parser():
    parser = argparse.ArgumentParser(
        description="Estimate normalizing constants with CIC-based adaptive importance sampling."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run one CIC-IS pipeline")
    add_problem_arguments(run_parser, require_b=True)
    add_sampling_arguments(run_parser)
    run_parser.add_argument(
        "--initial-proposal",
        help="JSON file of the initial mixture proposal, e.g. proposal.json of an earlier run (default: 30 random components)",
    )
    add_common_arguments(run_parser, default_format="json")
    run_parser.set_defaults(func=cmd_run)

    benchmark_parser = subparsers.add_parser("benchmark", help="Repeat the structural-safety experiment")
    add_problem_arguments(benchmark_parser)
    benchmark_parser.add_argument("--b-list", type=parse_float_list, help="Comma-separated thresholds (default: 1.5,2.0,2.5)")
    add_sampling_arguments(benchmark_parser)
    benchmark_parser.add_argument("--repetitions", type=int, default=500, help="Experiment repetitions (default: 500)")
    benchmark_parser.add_argument(
        "--methods",
        type=parse_method_list,
        help=f"Comma-separated methods (default: {','.join(DEFAULT_METHODS)}; supported: {','.join(SUPPORTED_METHODS)})",
    )
    add_common_arguments(benchmark_parser)
    benchmark_parser.set_defaults(func=cmd_benchmark)

    select_parser = subparsers.add_parser("select", help="Run one CIC grid search on the initial batch")
    add_problem_arguments(select_parser, require_b=True)
    select_parser.add_argument("--batch-size", type=int, default=1000, help="Size of batch 0 (default: 1000)")
    add_common_arguments(select_parser, formats=("csv",))
    select_parser.set_defaults(func=cmd_select)

    oracle_parser = subparsers.add_parser("oracle", help="Print the quadrature value of the failure probability")
    add_problem_arguments(oracle_parser)
    oracle_parser.add_argument("--b-list", type=parse_float_list, help="Comma-separated thresholds")
    oracle_parser.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "benchmark" and args.repetitions < 2:
        parser.error("--repetitions must be at least 2")
    if args.command == "oracle" and args.b is None and not args.b_list:
        parser.error("one of --b or --b-list is required")

    try:
        return args.func(args)
    except CicSamplerError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
