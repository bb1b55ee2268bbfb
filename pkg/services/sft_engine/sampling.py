"""
SAMPLING DESIGNS - Where a detection stage samples and how it solves
================================================================================

A stage works on a candidate set J of dimension t (the stage's local axes).
Its design fixes the local nodes in [0,1)^t, the Fourier operator on J over
those nodes, and the least squares path:

    full        every node of a reconstructing lattice, direct solve (1/M) L* f
    subsampled  n i.i.d. nodes of that lattice, CGNR with FFT-based operators
    random      n i.i.d. uniform points in [0,1)^t, CGNR with dense operators

with n = min_subsample_count(|J|, t_tail). Once n reaches the lattice size M
both sampled strategies fall back to "full", so they always take the same
number of nodes, min(n, M).

Stages on a single axis pass `lattice=axis_lattice(R)`; incremental stages
let the design search a reconstructing lattice for J.

Lattice nodes are never stored: `blocks` generates them from the node
indices on demand, so a stage holds one block of points at a time.

================================================================================
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator

from sft_engine.config import LatticeSearchSettings, SolverSettings, Strategy
from sft_engine.index_sets import FrequencySet
from sft_engine.lattice import (
    Rank1Lattice,
    SubsampledLattice,
    build_reconstructing,
    lattice_nodes,
    min_subsample_count,
    subsample,
)
from sft_engine.solver import SolveReport, direct_many, solve_many
from sft_engine.transform import LatticeOperator, PointOperator, SubsampledOperator

if TYPE_CHECKING:
    from sft_engine.sft import Deadline

log = logging.getLogger("sft_engine.sampling")


@dataclass(frozen=True, eq=False)
class SamplingDesign:
    """Local nodes and operator of one stage."""
    strategy: Strategy          # the strategy actually used (after fallback)
    freqs: FrequencySet
    operator: LinearOperator
    lattice: Optional[Rank1Lattice] = None
    sampling: Optional[SubsampledLattice] = None
    points: Optional[np.ndarray] = None     # (n, t) uniform points, random strategy only

    @property
    def n(self) -> int:
        return self.operator.shape[0]

    def nodes(self, start: int, stop: int) -> np.ndarray:
        """Local coordinates of nodes start..stop-1, shape (stop - start, t)."""
        if self.points is not None:
            return self.points[start:stop]
        if self.sampling is not None:
            return lattice_nodes(self.lattice, self.sampling.picks[start:stop])
        return lattice_nodes(self.lattice, np.arange(start, stop, dtype=np.int64))

    def blocks(self, block_size: int) -> Iterator[Tuple[int, np.ndarray]]:
        """(start, nodes) pairs covering all n nodes in order."""
        for start in range(0, self.n, block_size):
            yield start, self.nodes(start, min(start + block_size, self.n))

    def solve(
        self,
        samples: np.ndarray,
        settings: SolverSettings,
        deadline: Optional["Deadline"] = None,
    ) -> List[SolveReport]:
        """One report per column of `samples` (shape (n, anchors))."""
        if self.strategy is Strategy.FULL_LATTICE:
            return direct_many(samples, self.freqs, self.lattice)
        return solve_many(self.operator, samples, self.freqs, settings, deadline)


def full_design(freqs: FrequencySet, lat: Rank1Lattice) -> SamplingDesign:
    return SamplingDesign(
        strategy=Strategy.FULL_LATTICE,
        freqs=freqs,
        operator=LatticeOperator(freqs, lat),
        lattice=lat,
    )


def make_design(
    freqs: FrequencySet,
    strategy: Strategy,
    tail: float,
    rng: np.random.Generator,
    lattice: Optional[Rank1Lattice] = None,
    lattice_settings: Optional[LatticeSearchSettings] = None,
    chunk_size: int = 4096,
) -> SamplingDesign:
    """
    Build the sampling design of one stage.

    Args:
        freqs: candidate set J.
        strategy: requested strategy.
        tail: tail parameter t of the subsample bound.
        rng: stage generator (lattice search and node draws).
        lattice: reconstructing lattice for J; searched when None. Its size
            caps the node count of every strategy.
        lattice_settings: retry schedule for the search.
        chunk_size: row chunk of the dense operator (random strategy).
    """
    strategy = Strategy(strategy)
    lat = lattice or build_reconstructing(freqs, seed=rng, settings=lattice_settings)
    if strategy is Strategy.FULL_LATTICE:
        return full_design(freqs, lat)

    bound = min_subsample_count(len(freqs), tail)
    if bound >= lat.size:
        log.debug(f"subsample bound n={bound} >= M={lat.size} for |J|={len(freqs)}, sampling the full lattice")
        return full_design(freqs, lat)

    if strategy is Strategy.UNIFORM_RANDOM:
        points = rng.random((bound, freqs.dimension))
        return SamplingDesign(
            strategy=strategy,
            freqs=freqs,
            operator=PointOperator(freqs, points, chunk_size),
            lattice=lat,
            points=points,
        )

    sub = subsample(lat, bound, rng)
    return SamplingDesign(
        strategy=strategy,
        freqs=freqs,
        operator=SubsampledOperator(freqs, sub),
        lattice=lat,
        sampling=sub,
    )
