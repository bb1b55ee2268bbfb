"""
SOLVER - Least squares Fourier coefficients from samples
================================================================================

Given samples f at n nodes and a frequency set I, find

    g_hat = argmin || L g - f ||_2      (L = Fourier matrix, n x |I|)

TWO PATHS:
----------
1. Direct: on a full lattice that is reconstructing for I the normal matrix
   is L*L = M * Identity, so g_hat = (1/M) L* f (one FFT).

2. Iterative: conjugate gradients on the normal equations L*L g = L* f
   (CGNR), matrix-free through the operator's matvec/rmatvec. Starts from
   zero and stops after `max_iterations` or once

        || L*(L g - f) || / || L* f ||  <=  residual_tolerance

   A direction with (numerically) zero curvature ends the solve early with
   `breakdown` set; the current iterate is returned, never an exception.

CG minimizes the error in the normal-matrix norm, not the normal residual,
so `residual_history` may go up between iterations.

Several right-hand sides (one per anchor) are solved together: every column
runs its own CG recurrence and freezes once it has stopped, while operator
applications are batched.

================================================================================
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Tuple, Union

import numpy as np
from scipy.sparse.linalg import LinearOperator

from common.metrics import SOLVER_BREAKDOWNS, SOLVER_ITERATIONS
from sft_engine.config import SolverSettings
from sft_engine.errors import DimensionMismatchError, NotReconstructingError
from sft_engine.index_sets import FrequencySet
from sft_engine.lattice import Rank1Lattice, is_reconstructing
from sft_engine.transform import CoefficientVector, SampleVector, lattice_adjoint

if TYPE_CHECKING:
    from sft_engine.sft import Deadline

log = logging.getLogger("sft_engine.solver")

# curvature below this multiple of n * ||p||^2 counts as zero
BREAKDOWN_RATIO = 1e-14


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one least squares solve."""
    coefficients: CoefficientVector
    iterations: int
    residual_history: Tuple[float, ...]
    converged: bool
    breakdown: bool = False
    residual_norm: float = 0.0
    method: str = "cg"


def _sample_matrix(samples) -> np.ndarray:
    if isinstance(samples, SampleVector):
        samples = samples.values
    return np.asarray(samples, dtype=np.complex128)


def _column_norms(X: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(X) ** 2, axis=0))


def solve_many(
    operator: LinearOperator,
    samples,
    freqs: FrequencySet,
    settings: Optional[SolverSettings] = None,
    deadline: Optional["Deadline"] = None,
) -> List[SolveReport]:
    """
    CGNR for every column of `samples` (shape (n, B)) against the same operator.

    Args:
        operator: n x |I| LinearOperator with matmat and rmatmat.
        samples: sample matrix, one right-hand side per column.
        freqs: the frequency set the operator's columns belong to.
        settings: iteration cap and tolerance.
        deadline: checked once per iteration.

    Returns:
        One SolveReport per column, in column order.

    Raises:
        PipelineTimeout: the deadline expired between iterations.
    """
    settings = settings or SolverSettings()
    F = _sample_matrix(samples)
    if F.ndim == 1:
        F = F[:, None]
    n_rows, n_cols = operator.shape
    if F.shape[0] != n_rows:
        raise DimensionMismatchError(f"{F.shape[0]} samples for an operator with {n_rows} rows")
    if n_cols != len(freqs):
        raise DimensionMismatchError(f"operator has {n_cols} columns for {len(freqs)} frequencies")

    batch = F.shape[1]
    X = np.zeros((n_cols, batch), dtype=np.complex128)
    R = F.copy()
    S = operator.rmatmat(R)
    P = S.copy()
    gamma = np.sum(np.abs(S) ** 2, axis=0)
    reference = np.sqrt(gamma)

    active = reference > 0
    converged = ~active
    breakdown = np.zeros(batch, dtype=bool)
    iterations = np.zeros(batch, dtype=np.int64)
    history: List[List[float]] = [[] for _ in range(batch)]

    for _ in range(settings.max_iterations):
        if not active.any():
            break
        if deadline is not None:
            deadline.check("solver")
        Q = operator.matmat(P)
        curvature = np.sum(np.abs(Q) ** 2, axis=0)
        direction = np.sum(np.abs(P) ** 2, axis=0)
        flat = active & (curvature <= BREAKDOWN_RATIO * n_rows * direction)
        if flat.any():
            breakdown |= flat
            active &= ~flat
            log.warning(f"solver breakdown in {int(flat.sum())} of {batch} columns")
        if not active.any():
            break

        alpha = np.where(active, gamma / np.where(active, curvature, 1.0), 0.0)
        X += alpha * P
        R -= alpha * Q
        S = operator.rmatmat(R)
        gamma_next = np.sum(np.abs(S) ** 2, axis=0)
        iterations += active

        relative = np.sqrt(gamma_next) / np.where(reference > 0, reference, 1.0)
        for b in np.flatnonzero(active):
            history[b].append(float(relative[b]))
        done = active & (relative <= settings.residual_tolerance)
        converged |= done
        active &= ~done

        beta = np.where(active, gamma_next / np.where(gamma > 0, gamma, 1.0), 0.0)
        P = np.where(active, S + beta * P, P)
        gamma = np.where(active, gamma_next, gamma)

    residual = _column_norms(R)
    reports = []
    for b in range(batch):
        SOLVER_ITERATIONS.observe(int(iterations[b]))
        if breakdown[b]:
            SOLVER_BREAKDOWNS.inc()
        reports.append(SolveReport(
            coefficients=CoefficientVector(freqs, X[:, b]),
            iterations=int(iterations[b]),
            residual_history=tuple(history[b]),
            converged=bool(converged[b]),
            breakdown=bool(breakdown[b]),
            residual_norm=float(residual[b]),
        ))
    log.debug(
        f"CGNR on {n_rows}x{n_cols}, {batch} rhs: iterations={iterations.tolist()}, "
        f"converged={int(converged.sum())}/{batch}"
    )
    return reports


def lsq_solve(
    operator: LinearOperator,
    samples: Union[SampleVector, np.ndarray],
    freqs: FrequencySet,
    settings: Optional[SolverSettings] = None,
    deadline: Optional["Deadline"] = None,
) -> SolveReport:
    """Approximate argmin ||L g - f|| by CGNR from the zero vector."""
    F = _sample_matrix(samples)
    if F.ndim != 1:
        raise DimensionMismatchError("lsq_solve takes one sample vector; use solve_many for batches")
    return solve_many(operator, F, freqs, settings, deadline)[0]


def full_lattice_solve(
    samples: Union[SampleVector, np.ndarray],
    freqs: FrequencySet,
    lat: Rank1Lattice,
    verify: bool = True,
) -> CoefficientVector:
    """
    g_hat = (1/M) L* f on a reconstructing lattice.

    Raises:
        NotReconstructingError: if `verify` is set and residues collide on `freqs`.
    """
    if verify and not is_reconstructing(lat, freqs):
        raise NotReconstructingError(f"lattice of size {lat.size} is not reconstructing for |I|={len(freqs)}")
    values = _sample_matrix(samples)
    if values.ndim != 1:
        raise DimensionMismatchError("full_lattice_solve takes one sample vector")
    return CoefficientVector(freqs, lattice_adjoint(values, freqs, lat) / lat.size)


def direct_many(samples, freqs: FrequencySet, lat: Rank1Lattice) -> List[SolveReport]:
    """Direct solve for every column of `samples` (all M nodes, lattice already verified)."""
    F = _sample_matrix(samples)
    if F.ndim == 1:
        F = F[:, None]
    X = lattice_adjoint(F, freqs, lat) / lat.size
    return [
        SolveReport(
            coefficients=CoefficientVector(freqs, X[:, b]),
            iterations=0,
            residual_history=(),
            converged=True,
            method="direct",
        )
        for b in range(F.shape[1])
    ]
