"""
Shared Prometheus Metrics for the Sparse FFT Engine
===================================================

This module provides common metric definitions used by the library and the
benchmark harness. Each module imports and uses the relevant metrics.

Usage:
    from common.metrics import SAMPLES_EVALUATED, STAGE_DURATION

    with STAGE_DURATION.labels(kind="incremental").time():
        result = detect_incremental(...)

    SAMPLES_EVALUATED.labels(strategy="subsampled").inc(n)

The harness has no HTTP surface, so the registry is dumped to a textfile
(node-exporter textfile collector format) with `write_metrics_file`.
"""

from prometheus_client import (
    Counter,
    Histogram,
    REGISTRY,
    generate_latest,
    write_to_textfile,
)

# =============================================================================
# SAMPLING METRICS
# =============================================================================

SAMPLES_EVALUATED = Counter(
    'sft_samples_evaluated_total',
    'Total number of function evaluations requested by the pipeline',
    ['strategy']
)

# =============================================================================
# STAGE / SOLVER METRICS
# =============================================================================

STAGE_DURATION = Histogram(
    'sft_stage_duration_seconds',
    'Wall time of one detection stage',
    ['kind'],
    buckets=[0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 60.0, 300.0]
)

SOLVER_ITERATIONS = Histogram(
    'sft_solver_iterations',
    'Conjugate gradient iterations per least squares solve',
    buckets=[0, 1, 2, 3, 5, 8, 10, 20, 50, 100]
)

SOLVER_BREAKDOWNS = Counter(
    'sft_solver_breakdowns_total',
    'Least squares solves stopped on a zero-curvature direction'
)

LATTICE_TRIALS = Counter(
    'sft_lattice_trials_total',
    'Generating vectors tried while searching reconstructing lattices'
)

# =============================================================================
# HARNESS METRICS
# =============================================================================

BENCH_RUNS = Counter(
    'bench_runs_total',
    'Benchmark runs finished, by strategy and status',
    ['strategy', 'status']
)


# =============================================================================
# UTILITY FUNCTIONS
# =============================================================================

def get_metrics() -> bytes:
    """Generate Prometheus metrics output."""
    return generate_latest(REGISTRY)


def write_metrics_file(path: str) -> None:
    """Write the default registry to a textfile-collector file."""
    write_to_textfile(path, REGISTRY)
