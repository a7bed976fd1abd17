"""Command-line entry points: bench, deblur and momentum-table.

Exit codes: 0 on success, 2 on configuration errors, 3 on solver failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .bench import (BenchConfig, ConfigError, DeblurConfig, load_config,
                    momentum_table_csv, parse_pairs, run_deblur, run_sweep)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="accpgm")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="multistart hyperparameter sweep")
    bench.add_argument("--config", help="flat key = value config file")
    bench.add_argument("--problem")
    bench.add_argument("--n", type=int)
    bench.add_argument("--num-starts", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--eps", type=float)
    bench.add_argument("--max-iters", type=int)
    bench.add_argument("--pairs", help="semicolon-separated a,b tuples")
    bench.add_argument("--out-dir")

    deblur = sub.add_parser("deblur", help="image deblurring benchmark")
    deblur.add_argument("--size", type=int, default=128)
    deblur.add_argument("--seed", type=int, default=0)
    deblur.add_argument("--lambda", dest="lambda_reg", type=float, default=2e-5)
    deblur.add_argument("--iters", type=int, default=500)
    deblur.add_argument("--out-dir", default="deblur_out")

    table = sub.add_parser("momentum-table", help="dump k,t,gamma as CSV")
    table.add_argument("--a", type=float, required=True)
    table.add_argument("--b", type=float, required=True)
    table.add_argument("--k-max", type=int, required=True)
    return parser


def _bench_config(args) -> BenchConfig:
    overrides = {}
    if args.problem is not None:
        overrides["problem"] = args.problem
    if args.n is not None:
        overrides["n"] = args.n
    if args.num_starts is not None:
        overrides["num_starts"] = args.num_starts
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.eps is not None:
        overrides["eps"] = args.eps
    if args.max_iters is not None:
        overrides["max_iterations"] = args.max_iters
    if args.pairs is not None:
        overrides["pairs"] = parse_pairs(args.pairs)
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.config:
        return replace(load_config(args.config), **overrides)
    if "problem" not in overrides:
        raise ConfigError("either --config or --problem is required")
    return BenchConfig(**overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "bench":
            summary = run_sweep(_bench_config(args))
            return 3 if summary.failure_count else 0
        if args.command == "deblur":
            cfg = DeblurConfig(size=args.size, seed=args.seed,
                               lambda_reg=args.lambda_reg,
                               max_iterations=args.iters, out_dir=args.out_dir)
            summary = run_deblur(cfg)
            return 3 if summary.failure_count else 0
        momentum_table_csv(args.a, args.b, args.k_max, sys.stdout)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
