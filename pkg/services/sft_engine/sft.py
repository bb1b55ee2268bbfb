"""
SPARSE FFT - Dimension-incremental frequency detection
================================================================================

Finds the "most important" frequencies of a black-box function f on the
d-dimensional torus inside a search space Gamma, and approximates their
Fourier coefficients, from samples only.

HOW IT WORKS:
-------------
1. Axis stages (one per axis a):
   Candidates J = projection of Gamma onto axis a. For r random anchors xi,
   sample the slice x_a -> f(..., x_a, ...) with the other coordinates fixed
   to xi, solve least squares on J and score every frequency by
   max_i |g_hat_k(xi^i)|.

2. Incremental stages (t = 2, ..., d):
   J = (I_{0..t-2} x I_{t-1}) filtered by Gamma. Sample on a lattice that is
   reconstructing for J (or a subsample of it, or random points) in the
   leading t coordinates, anchors in the remaining d - t, then score as above.

   Each stage keeps the up to s_local frequencies with score >= threshold,
   largest scores first (ties by canonical order).

3. The last stage has no free coordinates, so its single solve gives the
   coefficients; they are truncated to the s largest.

One anchor can annihilate a projected coefficient by accident; taking the
maximum over r anchors makes that unlikely.

SEEDS:
------
Every random choice comes from derive_rng(seed, purpose, stage, ...), so a
single stage can be replayed in isolation.

================================================================================
"""

import logging
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from common.metrics import SAMPLES_EVALUATED, STAGE_DURATION
from sft_engine.config import SftConfig, Strategy
from sft_engine.errors import (
    DimensionMismatchError,
    PipelineTimeout,
    SftError,
    StageError,
)
from sft_engine.index_sets import FrequencySet, HyperbolicCross, candidate_product, hc_sample
from sft_engine.lattice import Rank1Lattice, axis_lattice, build_reconstructing
from sft_engine.sampling import SamplingDesign, make_design
from sft_engine.solver import SolveReport
from sft_engine.transform import CoefficientVector, naive_evaluate

log = logging.getLogger("sft_engine.sft")

# purpose keys of derive_rng
_AXIS, _INCREMENTAL, _REFIT = 0, 1, 2
_LATTICE, _NODES, _ANCHORS = 0, 1, 2


# ============================================================================
# PARAMETER BOUNDS
# ============================================================================

def min_detection_iterations(sparse_count: int, tail_abs_sum: float, delta: float, eps: float) -> int:
    """
    Anchors per stage that detect every frequency with |f_k| >= delta
    with probability >= 1 - eps:

        ceil( 4 (|I| + tail^2 / delta^2) (ln|I| + ln(1/eps)) )
    """
    if sparse_count < 1:
        raise ValueError(f"sparse_count must be >= 1, got {sparse_count}")
    if tail_abs_sum < 0 or delta <= 0:
        raise ValueError("need tail_abs_sum >= 0 and delta > 0")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    value = 4 * (sparse_count + tail_abs_sum ** 2 / delta ** 2) * (math.log(sparse_count) - math.log(eps))
    # 9 digits absorb rounding in exact cases such as eps = e^-1
    return max(1, math.ceil(round(value, 9)))


def threshold_bound(delta: float, proj_err_l2: float, sup_err: float) -> float:
    """Largest threshold that still guarantees detection; may be negative."""
    return delta / math.sqrt(2) - 4 * proj_err_l2 - 2 * sup_err


class ErrorBound(NamedTuple):
    tight: float
    loose: float


def least_squares_error_bound(
    proj_err_l2: float,
    sup_err_in: float,
    sup_err_out: float,
    set_size: int,
    excess: int,
) -> ErrorBound:
    """
    Bounds on the squared L2 error of a least squares fit on I from nodes
    satisfying the MZ inequality with A = 1/2, B = 3/2.

        tight = (3 e_2 + sqrt(2 / (9|I|)) e_in)^2 + 4 e_out^2
        loose = (3 + sqrt(2 excess / (9|I|)))^2 e_2^2 + 4 e_out^2
    """
    if set_size < 1 or excess < 0:
        raise ValueError("need set_size >= 1 and excess >= 0")
    tight = (3 * proj_err_l2 + math.sqrt(2 / (9 * set_size)) * sup_err_in) ** 2 + 4 * sup_err_out ** 2
    loose = (3 + math.sqrt(2 * excess / (9 * set_size))) ** 2 * proj_err_l2 ** 2 + 4 * sup_err_out ** 2
    return ErrorBound(tight, loose)


# ============================================================================
# SEEDS AND DEADLINES
# ============================================================================

def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, keys); same inputs, same stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))


class Deadline:
    """Cooperative time limit; `check` raises PipelineTimeout once expired."""

    def __init__(self, seconds: Optional[float] = None):
        self.seconds = seconds
        self._expires = None if seconds is None else time.monotonic() + seconds

    @property
    def remaining(self) -> float:
        if self._expires is None:
            return math.inf
        return self._expires - time.monotonic()

    def check(self, where: str = "") -> None:
        if self._expires is not None and time.monotonic() >= self._expires:
            raise PipelineTimeout(f"time limit of {self.seconds}s exceeded{' during ' + where if where else ''}")


# ============================================================================
# FUNCTIONS UNDER TEST
# ============================================================================

class SampledFunction:
    """
    Black-box f: [0,1)^d -> C with an evaluation counter.

    `evaluator` maps an (N, d) array of points to N values. Calls are split
    into chunks of `chunk_size` points; the counter is thread-safe.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], dimension: int, chunk_size: int = 65536):
        self.evaluator = evaluator
        self.dimension = dimension
        self.chunk_size = chunk_size
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0

    def __call__(self, points: np.ndarray, deadline: Optional[Deadline] = None) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.dimension:
            raise DimensionMismatchError(f"points of dimension {points.shape[1]} for a {self.dimension}-variate function")
        out = np.empty(points.shape[0], dtype=np.complex128)
        for start in range(0, points.shape[0], self.chunk_size):
            if deadline is not None:
                deadline.check("sampling")
            block = points[start:start + self.chunk_size]
            out[start:start + block.shape[0]] = self.evaluator(block)
            with self._lock:
                self._count += block.shape[0]
        return out


@dataclass(frozen=True)
class SparseTrigPolynomial:
    """Exactly sparse f = sum_k c_k exp(2 pi i <k, x>)."""
    coefficients: CoefficientVector

    @property
    def dimension(self) -> int:
        return self.coefficients.support.dimension

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return naive_evaluate(self.coefficients.values, self.coefficients.support, points)

    def sampled(self, chunk_size: int = 65536) -> SampledFunction:
        return SampledFunction(self, self.dimension, chunk_size)

    def coefficients_at(self, freqs: FrequencySet) -> np.ndarray:
        return self.coefficients.restrict(freqs).values

    def sq_norm(self) -> float:
        return float(np.sum(np.abs(self.coefficients.values) ** 2))

    def relative_l2_error(self, approx: CoefficientVector) -> float:
        norm = self.sq_norm()
        if len(approx) == 0:
            return 1.0
        exact = self.coefficients_at(approx.support)
        fit = np.sum(np.abs(exact - approx.values) ** 2)
        missed = max(0.0, norm - float(np.sum(np.abs(exact) ** 2)))
        return math.sqrt(fit + missed) / math.sqrt(norm)

    def max_coeff_error(self, approx: CoefficientVector) -> float:
        if len(approx) == 0:
            return 0.0
        return float(np.max(np.abs(self.coefficients_at(approx.support) - approx.values)))


def random_sparse_polynomial(
    hc: HyperbolicCross,
    sparsity: int,
    rng: np.random.Generator,
    unit_magnitude: bool = True,
) -> SparseTrigPolynomial:
    """`sparsity` distinct frequencies drawn uniformly from the cross, random phases."""
    support = hc_sample(hc, sparsity, rng)
    phases = np.exp(2j * np.pi * rng.random(sparsity))
    magnitudes = np.ones(sparsity) if unit_magnitude else 0.5 + rng.random(sparsity)
    return SparseTrigPolynomial(CoefficientVector(support, magnitudes * phases))


# ============================================================================
# RESULTS
# ============================================================================

@dataclass(frozen=True, eq=False)
class StageResult:
    """One detection stage."""
    stage: int
    kind: str                               # "axis" | "incremental" | "refit"
    axes: Tuple[int, ...]
    candidates: FrequencySet                # J
    detected: FrequencySet                  # I, subset of J
    scores: np.ndarray = field(repr=False)  # max_i |g_hat_k(xi^i)|, aligned with J
    samples_used: int = 0
    nodes: int = 0
    anchors: int = 0
    strategy: Optional[Strategy] = None
    lattice: Optional[Rank1Lattice] = None
    reports: Tuple[SolveReport, ...] = field(default=(), repr=False)
    duration_s: float = 0.0

    @property
    def detected_scores(self) -> np.ndarray:
        return self.scores[self.candidates.index_of(self.detected.array)]


@dataclass(frozen=True, eq=False)
class SftResult:
    frequencies: FrequencySet
    coefficients: CoefficientVector
    stages: List[StageResult]
    samples_total: int
    failure_bound: float
    empty_stage: Optional[int] = None


# ============================================================================
# STAGES
# ============================================================================

def select_frequencies(candidates: FrequencySet, scores: np.ndarray, threshold: float, limit: int) -> FrequencySet:
    """Up to `limit` candidates with score >= threshold, by descending score then canonical order."""
    eligible = np.flatnonzero(scores >= threshold)
    order = eligible[np.lexsort((eligible, -scores[eligible]))]
    return candidates.take(order[:limit])


def _assemble(local: np.ndarray, local_axes: Sequence[int], anchor: np.ndarray, dimension: int) -> np.ndarray:
    """Points (n, d): local coordinates on `local_axes`, the anchor's elsewhere."""
    free = [a for a in range(dimension) if a not in set(local_axes)]
    points = np.empty((local.shape[0], dimension), dtype=np.float64)
    points[:, list(local_axes)] = local
    if free:
        points[:, free] = anchor[None, :]
    return points


def _sample_slice(
    f: SampledFunction,
    design: SamplingDesign,
    local_axes: Sequence[int],
    anchor: np.ndarray,
    block_size: int,
    deadline: Deadline,
) -> np.ndarray:
    """f at every design node with the free coordinates fixed to `anchor`."""
    values = np.empty(design.n, dtype=np.complex128)
    for start, local in design.blocks(block_size):
        points = _assemble(local, local_axes, anchor, f.dimension)
        values[start:start + local.shape[0]] = f(points, deadline=deadline)
    return values


def _run_stage(
    f: SampledFunction,
    stage: int,
    kind: str,
    local_axes: Tuple[int, ...],
    candidates: FrequencySet,
    config: SftConfig,
    keys: Tuple[int, ...],
    lattice: Optional[Rank1Lattice] = None,
    deadline: Optional[Deadline] = None,
) -> StageResult:
    d = config.dimension
    free = d - len(local_axes)
    anchors_count = config.detection_iterations if free > 0 else 1
    deadline = deadline or Deadline()
    started = time.perf_counter()
    evaluated = SAMPLES_EVALUATED.labels(strategy=config.strategy.value)

    try:
        with STAGE_DURATION.labels(kind=kind).time():
            if lattice is None:
                lattice = build_reconstructing(
                    candidates, seed=derive_rng(config.seed, *keys, _LATTICE), settings=config.lattice
                )
            design: SamplingDesign = make_design(
                candidates,
                config.strategy,
                config.oversampling_t,
                derive_rng(config.seed, *keys, _NODES),
                lattice=lattice,
                chunk_size=min(config.chunk_size, 4096),
            )
            anchors = derive_rng(config.seed, *keys, _ANCHORS).random((anchors_count, free))
            deadline.check(f"stage {stage}")

            if design.strategy is Strategy.FULL_LATTICE:
                # one slice in memory at a time
                reports = []
                for anchor in anchors:
                    values = _sample_slice(f, design, local_axes, anchor, config.chunk_size, deadline)
                    evaluated.inc(design.n)
                    reports.extend(design.solve(values[:, None], config.solver))
            else:
                samples = np.empty((design.n, anchors_count), dtype=np.complex128)
                for i, anchor in enumerate(anchors):
                    samples[:, i] = _sample_slice(f, design, local_axes, anchor, config.chunk_size, deadline)
                    evaluated.inc(design.n)
                deadline.check(f"stage {stage}")
                reports = design.solve(samples, config.solver, deadline)
    except PipelineTimeout:
        raise
    except SftError as exc:
        raise StageError(stage, local_axes, str(exc), exc) from exc
    except (ValueError, ArithmeticError, MemoryError) as exc:
        raise StageError(stage, local_axes, f"{type(exc).__name__}: {exc}", exc) from exc

    magnitudes = np.column_stack([np.abs(rep.coefficients.values) for rep in reports])
    scores = magnitudes.max(axis=1)
    detected = select_frequencies(candidates, scores, config.threshold, config.local_sparsity)

    result = StageResult(
        stage=stage,
        kind=kind,
        axes=local_axes,
        candidates=candidates,
        detected=detected,
        scores=scores,
        samples_used=anchors_count * design.n,
        nodes=design.n,
        anchors=anchors_count,
        strategy=design.strategy,
        lattice=design.lattice,
        reports=tuple(reports),
        duration_s=time.perf_counter() - started,
    )
    log.info(
        f"stage {stage} ({kind}, axes {list(local_axes)}): |J|={len(candidates)} |I|={len(detected)} "
        f"M={design.lattice.size if design.lattice else '-'} n={design.n} r={anchors_count} "
        f"samples={result.samples_used} [{design.strategy.value}]"
    )
    return result


def detect_1d(
    f: SampledFunction,
    axis: int,
    config: SftConfig,
    stage: Optional[int] = None,
    deadline: Optional[Deadline] = None,
) -> StageResult:
    """
    Detect the projected frequencies on one axis.

    Candidates are the axis projection of the search space; the local nodes
    come from the equispaced lattice of size 2^j >= 2R + 1.
    """
    if not 0 <= axis < config.dimension:
        raise StageError(axis if stage is None else stage, (axis,), f"axis {axis} out of range for dimension {config.dimension}")
    candidates = config.search_space.axis_projection(axis)
    radius = int(np.abs(candidates.array).max())
    return _run_stage(
        f,
        stage=axis if stage is None else stage,
        kind="axis",
        local_axes=(axis,),
        candidates=candidates,
        config=config,
        keys=(_AXIS, axis),
        lattice=axis_lattice(radius),
        deadline=deadline,
    )


def detect_incremental(
    f: SampledFunction,
    previous: FrequencySet,
    axis_set: FrequencySet,
    config: SftConfig,
    stage: Optional[int] = None,
    deadline: Optional[Deadline] = None,
) -> StageResult:
    """
    Extend the detected set on the leading t-1 axes by axis t-1 (0-based).

    An empty candidate product yields an empty result (no samples taken).
    """
    t = previous.dimension + 1
    local_axes = tuple(range(t))
    stage = config.dimension + t - 2 if stage is None else stage
    if t < 2 or t > config.dimension:
        raise StageError(stage, local_axes, f"cannot extend a {previous.dimension}-dimensional set in dimension {config.dimension}")

    candidates = candidate_product(previous, axis_set, config.search_space)
    if len(candidates) == 0:
        log.warning(f"stage {stage}: candidate product on axes {list(local_axes)} is empty")
        return StageResult(
            stage=stage,
            kind="incremental",
            axes=local_axes,
            candidates=candidates,
            detected=candidates,
            scores=np.empty(0),
        )
    return _run_stage(
        f,
        stage=stage,
        kind="incremental",
        local_axes=local_axes,
        candidates=candidates,
        config=config,
        keys=(_INCREMENTAL, t),
        deadline=deadline,
    )


def refit(
    f: SampledFunction,
    freqs: FrequencySet,
    config: SftConfig,
    stage: int,
    deadline: Optional[Deadline] = None,
) -> StageResult:
    """One more least squares solve on the final set over all d axes."""
    return _run_stage(
        f,
        stage=stage,
        kind="refit",
        local_axes=tuple(range(config.dimension)),
        candidates=freqs,
        config=config,
        keys=(_REFIT,),
        deadline=deadline,
    )


# ============================================================================
# PIPELINE
# ============================================================================

def _final_coefficients(last: StageResult, sparsity: int) -> CoefficientVector:
    coefficients = last.reports[0].coefficients.restrict(last.detected)
    return coefficients.top(sparsity)


def sft_pipeline(f: SampledFunction, config: SftConfig, time_limit_s: Optional[float] = None) -> SftResult:
    """
    Run all stages and return the detected set with its coefficients.

    Raises:
        StageError: a stage failed; carries the stage index and axes.
        PipelineTimeout: `time_limit_s` elapsed; its `stage_samples` lists the
            samples of the finished stages and of the interrupted one.
    """
    d = config.dimension
    if f.dimension != d:
        raise DimensionMismatchError(f"function of dimension {f.dimension} for a {d}-dimensional pipeline")
    deadline = Deadline(time_limit_s)
    stages: List[StageResult] = []

    def finish(frequencies, coefficients, empty_stage=None) -> SftResult:
        total = sum(s.samples_used for s in stages)
        log.info(
            f"pipeline done: |I|={len(frequencies)} samples={total} stages={len(stages)}"
            + (f" (stopped at empty stage {empty_stage})" if empty_stage is not None else "")
        )
        return SftResult(
            frequencies=frequencies,
            coefficients=coefficients,
            stages=stages,
            samples_total=total,
            failure_bound=config.failure_bound,
            empty_stage=empty_stage,
        )

    def empty(stage: int) -> SftResult:
        log.warning(f"stage {stage} detected no frequencies, returning an empty result")
        return finish(FrequencySet.empty(d), CoefficientVector.empty(d), empty_stage=stage)

    def run() -> SftResult:
        axis_sets = []
        for axis in range(d):
            result = detect_1d(f, axis, config, stage=axis, deadline=deadline)
            stages.append(result)
            if len(result.detected) == 0:
                return empty(result.stage)
            axis_sets.append(result.detected)

        last = stages[-1]
        current = axis_sets[0]
        for t in range(2, d + 1):
            last = detect_incremental(f, current, axis_sets[t - 1], config, stage=d + t - 2, deadline=deadline)
            stages.append(last)
            if len(last.detected) == 0:
                return empty(last.stage)
            current = last.detected

        coefficients = _final_coefficients(last, config.sparsity)
        if config.refit:
            extra = refit(f, coefficients.support, config, stage=len(stages), deadline=deadline)
            stages.append(extra)
            coefficients = extra.reports[0].coefficients.top(config.sparsity)
        return finish(coefficients.support, coefficients)

    counted = f.count
    try:
        return run()
    except PipelineTimeout as exc:
        done = [s.samples_used for s in stages]
        partial = f.count - counted - sum(done)
        log.warning(f"pipeline timed out after {len(done)} stages ({sum(done) + partial} samples)")
        raise PipelineTimeout(str(exc), done + ([partial] if partial > 0 else [])) from exc
