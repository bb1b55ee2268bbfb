"""
BENCH SCHEMAS - Pydantic models for sweep configs, records and summaries
================================================================================

These models define the exact structure of:
1. What a sweep runs (ExperimentConfig)
2. What one pipeline run produced (ExperimentRecord, one CSV row)
3. The per-(strategy, s) medians written to the JSON summary (SummaryRow)

================================================================================
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from sft_engine.config import SftConfig, SolverSettings, Strategy
from sft_engine.index_sets import HyperbolicCross
from sft_engine.testfn import BENCHMARK_DIMENSION


class RunStatus(str, Enum):
    """Outcome of one pipeline run."""
    OK = "ok"
    TIMEOUT = "timeout"   # time limit hit, no error metrics
    ERROR = "error"       # stage failure, message kept in the record


class FunctionKind(str, Enum):
    """Function under test."""
    TESTFN = "testfn"     # B-spline benchmark (restricted to the first d axes)
    SPARSE = "sparse"     # random exactly sparse polynomial, unit magnitudes


class ExperimentConfig(BaseModel):
    """
    One sweep: every strategy x sparsity x repetition.

    Example:
        {
            "dimension": 4,
            "radius": 16,
            "sparsities": [8],
            "strategies": ["subsampled"],
            "repetitions": 1
        }
    """
    dimension: int = Field(10, ge=1, description="Ambient dimension d")
    radius: int = Field(256, ge=1, description="Hyperbolic cross radius R")
    sparsities: List[int] = Field(default_factory=lambda: [8, 16, 32, 64, 128, 256])
    strategies: List[Strategy] = Field(default_factory=lambda: list(Strategy))
    repetitions: int = Field(10, ge=1)
    seed: int = Field(0, ge=0, description="Master seed")
    eps: float = Field(0.25, gt=0, lt=1)
    detection_iterations: int = Field(5, ge=1)
    threshold: float = Field(1e-12, ge=0)
    local_factor: float = Field(1.2, ge=1)
    solver_max_iterations: int = Field(10, ge=1)
    solver_tolerance: float = Field(1e-8, ge=0)
    timeout_s: Optional[float] = Field(3600.0, gt=0, description="Per-run time limit; None disables it")
    function: FunctionKind = FunctionKind.TESTFN
    refit: bool = False
    jobs: int = Field(1, description="Parallel runs (joblib n_jobs semantics)")
    out_dir: str = "results"

    @field_validator("sparsities")
    @classmethod
    def _positive_sparsities(cls, v: List[int]) -> List[int]:
        if not v or any(s < 1 for s in v):
            raise ValueError("sparsities must be a non-empty list of positive integers")
        return v

    @field_validator("strategies")
    @classmethod
    def _distinct_strategies(cls, v: List[Strategy]) -> List[Strategy]:
        if not v or len(set(v)) != len(v):
            raise ValueError("strategies must be a non-empty list without repeats")
        return v

    @model_validator(mode="after")
    def _function_fits_dimension(self):
        if self.function is FunctionKind.TESTFN and self.dimension > BENCHMARK_DIMENSION:
            raise ValueError(f"the B-spline benchmark has at most {BENCHMARK_DIMENSION} dimensions")
        return self

    def sft_config(self, strategy: Strategy, sparsity: int, seed: int) -> SftConfig:
        return SftConfig(
            dimension=self.dimension,
            search_space=HyperbolicCross(self.dimension, self.radius),
            sparsity=sparsity,
            strategy=strategy,
            local_factor=self.local_factor,
            detection_iterations=self.detection_iterations,
            threshold=self.threshold,
            eps=self.eps,
            solver=SolverSettings(self.solver_max_iterations, self.solver_tolerance),
            seed=seed,
            refit=self.refit,
        )


class ExperimentRecord(BaseModel):
    """One pipeline run; field order is the CSV column order."""
    strategy: Strategy
    s: int = Field(..., ge=1)
    rep: int = Field(..., ge=0)
    seed: int = Field(..., ge=0)
    rel_l2_err: Optional[float] = None
    max_coeff_err: Optional[float] = None
    samples: int = Field(0, ge=0, description="Function evaluations of the run")
    stage_samples: List[int] = Field(default_factory=list)
    wall_s: float = Field(0.0, ge=0)
    status: RunStatus = RunStatus.OK
    message: Optional[str] = Field(None, description="Failure message (not written to CSV)")

    @model_validator(mode="after")
    def _consistent(self):
        if self.status is RunStatus.OK and self.samples != sum(self.stage_samples):
            raise ValueError(f"samples={self.samples} but stage samples sum to {sum(self.stage_samples)}")
        if self.status is not RunStatus.OK and (self.rel_l2_err is not None or self.max_coeff_err is not None):
            raise ValueError("failed runs carry no error metrics")
        return self


class SummaryRow(BaseModel):
    """Lower medians over the successful repetitions of one (strategy, s)."""
    strategy: Strategy
    s: int
    runs: int
    ok_runs: int
    median_rel_l2_err: Optional[float] = None
    median_max_coeff_err: Optional[float] = None
    median_samples: Optional[int] = None
    median_wall_s: Optional[float] = None


class DetectResult(BaseModel):
    """JSON output of a single `detect` run."""
    strategy: Strategy
    s: int
    seed: int
    frequencies: List[List[int]]
    coefficients: List[List[float]] = Field(..., description="[real, imag] per frequency")
    samples: int
    stage_samples: List[int]
    rel_l2_err: float
    max_coeff_err: float
    failure_bound: float
    empty_stage: Optional[int] = None
    wall_s: float


class SummaryReport(BaseModel):
    """Contents of the JSON summary file."""
    config: ExperimentConfig
    rows: List[SummaryRow]
