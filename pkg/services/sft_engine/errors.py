"""
ERRORS - Exception hierarchy of the sparse FFT engine
================================================================================

Every exception raised on purpose by the engine derives from `SftError`, and
also from the builtin it refines, so callers can catch either.

================================================================================
"""

from typing import List, Optional, Sequence, Tuple


class SftError(Exception):
    """Base class for engine errors."""


class DimensionMismatchError(SftError, ValueError):
    """Frequencies, points or lattices of different dimensions were combined."""


class InvalidAxesError(SftError, ValueError):
    """An axis list is empty, out of range or not strictly increasing."""


class FormatError(SftError, ValueError):
    """A frequency-set or lattice text file could not be parsed."""


class LatticeSearchError(SftError, RuntimeError):
    """No reconstructing lattice was found within the retry schedule."""


class PipelineTimeout(SftError, TimeoutError):
    """A cooperative deadline expired inside the pipeline.

    `stage_samples` holds the sample count of every stage that finished before
    the deadline, followed by the samples of the interrupted stage (if any).
    """

    def __init__(self, message: str = "", stage_samples: Sequence[int] = ()):
        super().__init__(message)
        self.stage_samples: List[int] = [int(n) for n in stage_samples]


class StageError(SftError, RuntimeError):
    """A detection stage failed; carries the stage index and its axes."""

    def __init__(self, stage: int, axes: Tuple[int, ...], message: str, cause: Optional[BaseException] = None):
        super().__init__(f"stage {stage} (axes {list(axes)}): {message}")
        self.stage = stage
        self.axes = tuple(axes)
        self.cause = cause


class NotReconstructingError(SftError, ValueError):
    """A lattice was used as reconstructing for a set whose residues collide."""
