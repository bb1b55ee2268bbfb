"""
SFT ENGINE CONFIGURATION
================================================================================

Centralized configuration for the sparse FFT pipeline.
All defaults can be overridden via environment variables.

    SFT_SOLVER_MAX_ITERATIONS   CG iteration cap per least squares solve (10)
    SFT_SOLVER_TOLERANCE        relative normal-equation residual target (1e-8)
    SFT_LATTICE_SIZE_FACTOR     lattice search starts at M >= factor * |I|^2 (2.0)
    SFT_LATTICE_TRIALS          random generating vectors tried per lattice size (20)
    SFT_LATTICE_MAX_ROUNDS      lattice sizes tried before giving up (40)
    SFT_STRATEGY                full | random | subsampled (subsampled)
    SFT_LOCAL_FACTOR            s_local = ceil(factor * s) (1.2)
    SFT_DETECTION_ITERATIONS    anchors per stage, r (5)
    SFT_THRESHOLD               detection threshold delta' (1e-12)
    SFT_EPS                     per-stage failure probability (0.25)
    SFT_CHUNK_SIZE              points per batch when sampling f (65536)

================================================================================
"""

import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from sft_engine.index_sets import HyperbolicCross


class Strategy(str, Enum):
    """Sampling strategy used by the detection stages."""
    FULL_LATTICE = "full"
    UNIFORM_RANDOM = "random"
    SUBSAMPLED_LATTICE = "subsampled"


@dataclass(frozen=True)
class SolverSettings:
    """Least squares solver limits."""
    max_iterations: int = int(os.getenv("SFT_SOLVER_MAX_ITERATIONS", "10"))
    residual_tolerance: float = float(os.getenv("SFT_SOLVER_TOLERANCE", "1e-8"))

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.residual_tolerance < 0:
            raise ValueError(f"residual_tolerance must be >= 0, got {self.residual_tolerance}")


@dataclass(frozen=True)
class LatticeSearchSettings:
    """Retry schedule of the reconstructing-lattice search."""
    size_factor: float = float(os.getenv("SFT_LATTICE_SIZE_FACTOR", "2.0"))
    trials_per_size: int = int(os.getenv("SFT_LATTICE_TRIALS", "20"))
    max_rounds: int = int(os.getenv("SFT_LATTICE_MAX_ROUNDS", "40"))

    def __post_init__(self):
        if self.size_factor <= 0:
            raise ValueError(f"size_factor must be > 0, got {self.size_factor}")
        if self.trials_per_size < 1 or self.max_rounds < 1:
            raise ValueError("trials_per_size and max_rounds must be >= 1")


@dataclass(frozen=True)
class SftConfig:
    """
    All knobs of one pipeline run.

    `dimension` must agree with `search_space.dimension`; it is kept as a
    separate field so configs read naturally in logs and records.
    """
    dimension: int
    search_space: HyperbolicCross
    sparsity: int
    strategy: Strategy = Strategy(os.getenv("SFT_STRATEGY", "subsampled"))
    local_factor: float = float(os.getenv("SFT_LOCAL_FACTOR", "1.2"))
    detection_iterations: int = int(os.getenv("SFT_DETECTION_ITERATIONS", "5"))
    threshold: float = float(os.getenv("SFT_THRESHOLD", "1e-12"))
    eps: float = float(os.getenv("SFT_EPS", "0.25"))
    oversampling: Optional[float] = None  # tail parameter t; None -> ln(2r/eps)
    solver: SolverSettings = field(default_factory=SolverSettings)
    lattice: LatticeSearchSettings = field(default_factory=LatticeSearchSettings)
    seed: int = 0
    refit: bool = False
    chunk_size: int = int(os.getenv("SFT_CHUNK_SIZE", "65536"))

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.search_space.dimension != self.dimension:
            raise ValueError(
                f"search space has dimension {self.search_space.dimension}, config says {self.dimension}"
            )
        if self.sparsity < 1:
            raise ValueError(f"sparsity must be >= 1, got {self.sparsity}")
        if self.local_factor < 1:
            raise ValueError(f"local_factor must be >= 1, got {self.local_factor}")
        if self.detection_iterations < 1:
            raise ValueError(f"detection_iterations must be >= 1, got {self.detection_iterations}")
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.oversampling is not None and self.oversampling <= 0:
            raise ValueError(f"oversampling must be > 0, got {self.oversampling}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        # accept plain strings such as "full" from callers
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    @property
    def local_sparsity(self) -> int:
        # rounding guards against 1.2 * 5 = 6.000000000000001
        return max(self.sparsity, math.ceil(round(self.local_factor * self.sparsity, 9)))

    @property
    def oversampling_t(self) -> float:
        if self.oversampling is not None:
            return self.oversampling
        return math.log(2 * self.detection_iterations / self.eps)

    @property
    def failure_bound(self) -> float:
        """Union bound over all stages, 6 d eps (may exceed 1)."""
        return 6 * self.dimension * self.eps
