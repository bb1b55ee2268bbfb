"""
BENCH CLI - Command-line entry point of the sparse FFT harness
================================================================================

Subcommands:

    run       experiment sweep (strategies x sparsities x repetitions)
    detect    one pipeline run on the B-spline benchmark or a sparse synthetic
    lattice   build, verify or subsample a lattice for an index-set file
    count     size of a hyperbolic cross

USAGE:
------
    python -m bench count --dimension 10 --radius 256
    python -m bench detect --dimension 4 --radius 16 --sparsity 8 --strategy subsampled --seed 1
    python -m bench run --dimension 10 --sparsity 8,16,32 --reps 5 --out results/

Results go to stdout (or files); logs go to stderr.
Exit codes: 0 success, 1 runtime failure, 2 usage error.

================================================================================
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from common.metrics import write_metrics_file
from sft_engine.config import Strategy
from sft_engine.errors import SftError
from sft_engine.index_sets import FrequencySet, hc_count
from sft_engine.lattice import (
    SubsampledLattice,
    build_reconstructing,
    empirical_mz,
    is_reconstructing,
    min_subsample_count,
    parse_lattice,
    serialize_lattice,
    subsample,
)
from sft_engine.sft import sft_pipeline

from bench.config import config
from bench.experiment import build_function, pipeline_seed, run_experiment, summarize
from bench.report import emit
from bench.schemas import DetectResult, ExperimentConfig, FunctionKind
from bench.tracking import track_sweep

log = logging.getLogger("bench.app")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Arguments parsed but make no sense together."""


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def _int_list(raw: str) -> List[int]:
    try:
        values = [int(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {raw!r}")
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _strategy_list(raw: str) -> List[Strategy]:
    if raw == "all":
        return list(Strategy)
    try:
        return [Strategy(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError:
        choices = ", ".join(s.value for s in Strategy)
        raise argparse.ArgumentTypeError(f"strategies must be 'all' or a list of {choices}; got {raw!r}")


def _add_pipeline_flags(p: argparse.ArgumentParser, many: bool) -> None:
    sweep, pipeline = config.sweep, config.pipeline
    p.add_argument("--dimension", type=int, default=sweep.dimension)
    p.add_argument("--radius", type=int, default=sweep.radius)
    p.add_argument("--sparsity", type=_int_list, default=sweep.sparsities if many else [8],
                   help="comma-separated list" if many else "target sparsity s")
    p.add_argument("--strategy", type=_strategy_list, default=list(Strategy) if many else [Strategy.SUBSAMPLED_LATTICE],
                   help="full, random, subsampled, a comma list, or all")
    p.add_argument("--seed", type=int, default=sweep.seed)
    p.add_argument("--eps", type=float, default=pipeline.eps, help="per-stage failure probability")
    p.add_argument("--iterations", type=int, default=pipeline.detection_iterations, help="detection iterations r (anchors per stage)")
    p.add_argument("--threshold", type=float, default=pipeline.threshold, help="detection threshold")
    p.add_argument("--local-factor", type=float, default=pipeline.local_factor)
    p.add_argument("--solver-iterations", type=int, default=pipeline.solver_max_iterations, help="CG iteration cap")
    p.add_argument("--timeout-s", type=float, default=sweep.timeout_s)
    p.add_argument("--function", choices=[k.value for k in FunctionKind], default=FunctionKind.TESTFN.value)
    p.add_argument("--refit", action="store_true", help="one extra least squares solve on the final set")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=config.output.log_level)
    common.add_argument("--metrics-file", help="write Prometheus metrics to this textfile on exit")

    parser = argparse.ArgumentParser(prog="bench", description="Sparse FFT on rank-1 lattices: experiments and tools")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", parents=[common], help="experiment sweep")
    _add_pipeline_flags(run, many=True)
    run.add_argument("--reps", type=int, default=config.sweep.repetitions)
    run.add_argument("--jobs", type=int, default=config.sweep.jobs)
    run.add_argument("--out", default=config.output.out_dir, help="output directory")
    run.add_argument("--format", choices=["csv", "json", "both"], default="both")
    run.add_argument("--mlflow-uri", default=None, help="override MLFLOW_TRACKING_URI")

    detect = sub.add_parser("detect", parents=[common], help="single pipeline run")
    _add_pipeline_flags(detect, many=False)
    detect.add_argument("--out", help="write the detected frequency set to this file")
    detect.add_argument("--format", choices=["text", "json"], default="text")

    lattice = sub.add_parser("lattice", parents=[common], help="build, verify or subsample a lattice")
    lattice.add_argument("--index-set", required=True, help="frequency-set file")
    lattice.add_argument("--lattice", help="verify this lattice descriptor instead of building one")
    group = lattice.add_mutually_exclusive_group()
    group.add_argument("--subsample", type=int, help="number of nodes to draw")
    group.add_argument("--subsample-t", type=float, help="draw min_subsample_count(|I|, t) nodes")
    lattice.add_argument("--mz-trials", type=int, default=0, help="report empirical MZ constants")
    lattice.add_argument("--seed", type=int, default=0)
    lattice.add_argument("--out", help="write the lattice descriptor to this file")

    count = sub.add_parser("count", parents=[common], help="hyperbolic cross size")
    count.add_argument("--dimension", type=int, required=True)
    count.add_argument("--radius", type=int, required=True)

    return parser


def _experiment_config(args, many: bool) -> ExperimentConfig:
    return ExperimentConfig(
        dimension=args.dimension,
        radius=args.radius,
        sparsities=args.sparsity,
        strategies=args.strategy,
        repetitions=getattr(args, "reps", 1),
        seed=args.seed,
        eps=args.eps,
        detection_iterations=args.iterations,
        threshold=args.threshold,
        local_factor=args.local_factor,
        solver_max_iterations=args.solver_iterations,
        solver_tolerance=config.pipeline.solver_tolerance,
        timeout_s=args.timeout_s,
        function=FunctionKind(args.function),
        refit=args.refit,
        jobs=getattr(args, "jobs", 1),
        out_dir=args.out if many else config.output.out_dir,
    )


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_count(args) -> int:
    if args.dimension < 1 or args.radius < 1:
        raise UsageError("--dimension and --radius must be >= 1")
    print(hc_count(args.dimension, args.radius))
    return EXIT_OK


def cmd_detect(args) -> int:
    if len(args.sparsity) != 1 or len(args.strategy) != 1:
        raise UsageError("detect takes a single --sparsity and a single --strategy")
    cfg = _experiment_config(args, many=False)
    strategy, sparsity = cfg.strategies[0], cfg.sparsities[0]
    seed = pipeline_seed(cfg.seed, strategy, sparsity, 0)
    truth = build_function(cfg, sparsity, 0)
    f = truth.sampled()

    log.info(f"🚀 detect: d={cfg.dimension} R={cfg.radius} s={sparsity} strategy={strategy.value} seed={seed}")
    started = time.perf_counter()
    result = sft_pipeline(f, cfg.sft_config(strategy, sparsity, seed), time_limit_s=cfg.timeout_s)
    wall = time.perf_counter() - started

    rel = truth.relative_l2_error(result.coefficients)
    worst = truth.max_coeff_error(result.coefficients)
    log.info(f"📊 |I|={len(result.frequencies)} samples={result.samples_total:,} rel_l2={rel:.3e} wall={wall:.2f}s")

    if args.out:
        Path(args.out).write_text(result.frequencies.serialize())
        log.info(f"wrote {args.out}")
    if args.format == "json":
        values = result.coefficients.values
        print(DetectResult(
            strategy=strategy,
            s=sparsity,
            seed=seed,
            frequencies=result.frequencies.array.tolist(),
            coefficients=[[float(v.real), float(v.imag)] for v in values],
            samples=result.samples_total,
            stage_samples=[stage.samples_used for stage in result.stages],
            rel_l2_err=rel,
            max_coeff_err=worst,
            failure_bound=result.failure_bound,
            empty_stage=result.empty_stage,
            wall_s=wall,
        ).model_dump_json(indent=2))
    else:
        sys.stdout.write(result.frequencies.serialize())
    return EXIT_OK


def cmd_lattice(args) -> int:
    freqs = FrequencySet.parse(Path(args.index_set).read_text())
    if len(freqs) == 0:
        raise UsageError("index set is empty")

    if args.lattice:
        sampling = parse_lattice(Path(args.lattice).read_text())
        lat = sampling.base if isinstance(sampling, SubsampledLattice) else sampling
        ok = is_reconstructing(lat, freqs)
        print("reconstructing" if ok else "not reconstructing")
        if not ok:
            return EXIT_FAILURE
    else:
        lat = build_reconstructing(freqs, seed=args.seed)
        sampling = lat
        log.info(f"reconstructing lattice for |I|={len(freqs)}: M={lat.size}")

    if args.subsample is not None or args.subsample_t is not None:
        n = args.subsample if args.subsample is not None else min_subsample_count(len(freqs), args.subsample_t)
        sampling = subsample(lat, n, seed=args.seed)
        log.info(f"subsampled {n} of {lat.size} nodes")

    if args.mz_trials > 0:
        low, high = empirical_mz(sampling, freqs, args.mz_trials, seed=args.seed)
        print(f"mz {low:.6f} {high:.6f}")

    text = serialize_lattice(sampling)
    if args.out:
        Path(args.out).write_text(text)
        log.info(f"wrote {args.out}")
    elif not args.lattice:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _experiment_config(args, many=True)
    log.info("=" * 70)
    log.info("SPARSE FFT BENCHMARK SWEEP")
    log.info("=" * 70)
    records = run_experiment(cfg)
    artifacts = emit(records, cfg, args.out, args.format)
    summary = summarize(records)
    track_sweep(cfg, records, summary, artifacts, tracking_uri=args.mlflow_uri)

    print("strategy,s,runs,ok_runs,median_rel_l2_err,median_samples,median_wall_s")
    for row in summary:
        print(f"{row.strategy.value},{row.s},{row.runs},{row.ok_runs},"
              f"{row.median_rel_l2_err},{row.median_samples},{row.median_wall_s}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "detect": cmd_detect, "lattice": cmd_lattice, "count": cmd_count}


# ============================================================================
# ENTRY POINT
# ============================================================================

def cli_main(argv: Optional[List[str]] = None) -> int:
    """Parse `argv`, run the subcommand, return the exit code."""
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s - %(message)s",
        stream=sys.stderr,
    )

    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValidationError) as exc:
        print(f"bench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SftError, OSError, ValueError) as exc:
        log.exception(f"{args.command} failed: {exc}")
        return EXIT_FAILURE
    finally:
        if args.metrics_file:
            write_metrics_file(args.metrics_file)


if __name__ == "__main__":
    sys.exit(cli_main())
