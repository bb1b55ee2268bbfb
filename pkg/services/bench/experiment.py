"""
EXPERIMENT SWEEP - Run the pipeline over strategies, sparsities and repetitions
================================================================================

This module:
1. Derives a replayable seed for every (strategy, s, repetition)
2. Builds the function under test and runs sft_pipeline with a time limit
3. Scores the result against exact coefficients
4. Aggregates lower medians per (strategy, s)

Runs are independent and may execute in parallel through joblib; records
come back in task order, not completion order.

SEEDS:
------
    instance seed  = f(master, s, rep)            same function for every strategy
    pipeline seed  = f(master, strategy, s, rep)  lattices, nodes, anchors

================================================================================
"""

import logging
import time
from typing import List, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from common.metrics import BENCH_RUNS
from sft_engine.config import Strategy
from sft_engine.errors import PipelineTimeout, SftError
from sft_engine.index_sets import HyperbolicCross
from sft_engine.sft import SparseTrigPolynomial, derive_rng, random_sparse_polynomial, sft_pipeline
from sft_engine.testfn import BSplineTestFunction

from bench.schemas import ExperimentConfig, ExperimentRecord, FunctionKind, RunStatus, SummaryRow

log = logging.getLogger("bench.experiment")

GroundTruth = Union[BSplineTestFunction, SparseTrigPolynomial]

_STRATEGY_KEY = {strategy: i for i, strategy in enumerate(Strategy)}


# ============================================================================
# SEEDS AND FUNCTIONS
# ============================================================================

def _seed_from(master: int, *keys: int) -> int:
    sequence = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def instance_seed(master: int, sparsity: int, rep: int) -> int:
    return _seed_from(master, 0, sparsity, rep)


def pipeline_seed(master: int, strategy: Strategy, sparsity: int, rep: int) -> int:
    return _seed_from(master, 1, _STRATEGY_KEY[Strategy(strategy)], sparsity, rep)


def build_function(cfg: ExperimentConfig, sparsity: int, rep: int) -> GroundTruth:
    """The function under test for one (s, rep); independent of the strategy."""
    if cfg.function is FunctionKind.TESTFN:
        return BSplineTestFunction.reduced(cfg.dimension)
    rng = derive_rng(instance_seed(cfg.seed, sparsity, rep))
    return random_sparse_polynomial(HyperbolicCross(cfg.dimension, cfg.radius), sparsity, rng)


# ============================================================================
# SINGLE RUN
# ============================================================================

def run_one(cfg: ExperimentConfig, strategy: Strategy, sparsity: int, rep: int) -> ExperimentRecord:
    """
    Run the pipeline once and turn the outcome into a record.

    Timeouts and stage failures are recorded, never raised.
    """
    strategy = Strategy(strategy)
    seed = pipeline_seed(cfg.seed, strategy, sparsity, rep)
    truth = build_function(cfg, sparsity, rep)
    f = truth.sampled()
    sft_cfg = cfg.sft_config(strategy, sparsity, seed)
    base = dict(strategy=strategy, s=sparsity, rep=rep, seed=seed)

    started = time.perf_counter()
    try:
        result = sft_pipeline(f, sft_cfg, time_limit_s=cfg.timeout_s)
    except PipelineTimeout as exc:
        wall = time.perf_counter() - started
        log.warning(f"{strategy.value} s={sparsity} rep={rep}: {exc}")
        BENCH_RUNS.labels(strategy=strategy.value, status=RunStatus.TIMEOUT.value).inc()
        return ExperimentRecord(
            **base, samples=f.count, stage_samples=exc.stage_samples, wall_s=wall, status=RunStatus.TIMEOUT
        )
    except SftError as exc:
        wall = time.perf_counter() - started
        log.error(f"{strategy.value} s={sparsity} rep={rep} failed: {exc}")
        BENCH_RUNS.labels(strategy=strategy.value, status=RunStatus.ERROR.value).inc()
        return ExperimentRecord(**base, samples=f.count, wall_s=wall, status=RunStatus.ERROR, message=str(exc))
    wall = time.perf_counter() - started

    record = ExperimentRecord(
        **base,
        rel_l2_err=truth.relative_l2_error(result.coefficients),
        max_coeff_err=truth.max_coeff_error(result.coefficients),
        samples=result.samples_total,
        stage_samples=[stage.samples_used for stage in result.stages],
        wall_s=wall,
    )
    if f.count != result.samples_total:
        log.warning(f"evaluation counter {f.count} differs from reported samples {result.samples_total}")
    BENCH_RUNS.labels(strategy=strategy.value, status=RunStatus.OK.value).inc()
    log.info(
        f"{strategy.value} s={sparsity} rep={rep}: rel_l2={record.rel_l2_err:.3e} "
        f"samples={record.samples:,} wall={wall:.2f}s"
    )
    return record


# ============================================================================
# SWEEP
# ============================================================================

def sweep_tasks(cfg: ExperimentConfig) -> List[Tuple[Strategy, int, int]]:
    return [
        (strategy, sparsity, rep)
        for strategy in cfg.strategies
        for sparsity in cfg.sparsities
        for rep in range(cfg.repetitions)
    ]


def run_experiment(cfg: ExperimentConfig) -> List[ExperimentRecord]:
    """All strategy x s x repetition runs, in that nesting order."""
    tasks = sweep_tasks(cfg)
    log.info(f"sweep: {len(tasks)} runs, d={cfg.dimension}, R={cfg.radius}, jobs={cfg.jobs}")
    if cfg.jobs == 1:
        return [run_one(cfg, *task) for task in tasks]
    return list(Parallel(n_jobs=cfg.jobs)(delayed(run_one)(cfg, *task) for task in tasks))


def records_frame(records: List[ExperimentRecord]) -> pd.DataFrame:
    columns = list(ExperimentRecord.model_fields)
    return pd.DataFrame([r.model_dump(mode="json") for r in records], columns=columns)


def summarize(records: List[ExperimentRecord]) -> List[SummaryRow]:
    """Lower medians of the successful runs per (strategy, s), in first-seen order."""
    if not records:
        return []
    frame = records_frame(records)
    rows = []
    for (strategy, sparsity), group in frame.groupby(["strategy", "s"], sort=False):
        ok = group[group["status"] == RunStatus.OK.value]

        def median(column: str):
            if ok.empty:
                return None
            return ok[column].astype(float).quantile(0.5, interpolation="lower")

        samples = median("samples")
        rows.append(SummaryRow(
            strategy=strategy,
            s=int(sparsity),
            runs=len(group),
            ok_runs=len(ok),
            median_rel_l2_err=median("rel_l2_err"),
            median_max_coeff_err=median("max_coeff_err"),
            median_samples=None if samples is None else int(samples),
            median_wall_s=median("wall_s"),
        ))
    return rows
