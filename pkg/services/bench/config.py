"""
BENCH CONFIGURATION
================================================================================

Defaults of the experiment harness.
All settings can be overridden via environment variables; CLI flags
override both.

================================================================================
"""

import os
from dataclasses import dataclass, field
from typing import Callable, List


def _int_list(raw: str) -> List[int]:
    return [int(v) for v in raw.split(",") if v.strip()]


def _from_env(name: str, default: str, cast: Callable):
    """Field read from the environment when the config is created."""
    return field(default_factory=lambda: cast(os.getenv(name, default)))


@dataclass
class SweepConfig:
    """Experiment sweep defaults (desk scale)."""
    dimension: int = int(os.getenv("BENCH_DIMENSION", "10"))
    radius: int = int(os.getenv("BENCH_RADIUS", "256"))
    sparsities: List[int] = field(
        default_factory=lambda: _int_list(os.getenv("BENCH_SPARSITIES", "8,16,32,64,128,256"))
    )
    repetitions: int = int(os.getenv("BENCH_REPS", "10"))
    timeout_s: float = float(os.getenv("BENCH_TIMEOUT_S", "3600"))
    jobs: int = int(os.getenv("BENCH_JOBS", "1"))
    seed: int = int(os.getenv("BENCH_SEED", "0"))


@dataclass
class PipelineConfig:
    """Pipeline defaults of the CLI flags; the engine's SFT_* variables."""
    eps: float = _from_env("SFT_EPS", "0.25", float)
    detection_iterations: int = _from_env("SFT_DETECTION_ITERATIONS", "5", int)
    threshold: float = _from_env("SFT_THRESHOLD", "1e-12", float)
    local_factor: float = _from_env("SFT_LOCAL_FACTOR", "1.2", float)
    solver_max_iterations: int = _from_env("SFT_SOLVER_MAX_ITERATIONS", "10", int)
    solver_tolerance: float = _from_env("SFT_SOLVER_TOLERANCE", "1e-8", float)


@dataclass
class OutputConfig:
    """Where results go."""
    out_dir: str = os.getenv("BENCH_OUT_DIR", "results")
    log_level: str = os.getenv("LOG_LEVEL", "INFO")


@dataclass
class MLflowConfig:
    """MLflow tracking settings; tracking is off while the URI is empty."""
    tracking_uri: str = os.getenv("MLFLOW_TRACKING_URI", "")
    experiment_name: str = os.getenv("MLFLOW_EXPERIMENT", "sparse-fft-bench")


@dataclass
class Config:
    """Master configuration."""
    sweep: SweepConfig = field(default_factory=SweepConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    mlflow: MLflowConfig = field(default_factory=MLflowConfig)


# Global config instance
config = Config()
