"""
RANK-1 LATTICES - Construction, verification and subsampling
================================================================================

A rank-1 lattice with generating vector z and size M has the nodes

    x^i = (i * z mod M) / M,   i = 0, ..., M-1   (entry-wise)

It is RECONSTRUCTING for a frequency set I when the residues <k, z> mod M are
pairwise distinct over I. Then the Fourier matrix on I is orthogonal over the
lattice (L*L = M * Identity) and one FFT of length M recovers coefficients.

HOW LATTICES ARE FOUND:
-----------------------
    M = smallest prime >= max(factor * |I|^2, |I| + 1)
    try `trials_per_size` random generators z in {0..M-1}^d
    on failure, M = next prime >= 2M

Every returned lattice is verified, so reconstruction holds deterministically.
1-D sets use z = (1) as the first candidate; the 1-D detection stages use
`axis_lattice`, an equispaced grid whose size is a power of two.

SUBSAMPLING:
------------
A subsampled lattice keeps n node indices drawn i.i.d. uniformly (with
replacement). With n >= 12 |I| (ln|I| + t) the sampling operator satisfies
the Marcinkiewicz-Zygmund inequality with A = 1/2, B = 3/2 with probability
at least 1 - 2 exp(-t).

================================================================================
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from common.metrics import LATTICE_TRIALS
from sft_engine.config import LatticeSearchSettings
from sft_engine.errors import DimensionMismatchError, FormatError, LatticeSearchError
from sft_engine.index_sets import FrequencySet

log = logging.getLogger("sft_engine.lattice")

Seed = Union[None, int, np.random.SeedSequence, np.random.Generator]

# largest M for which i * z_t fits in int64 without reduction tricks
_MAX_VECTORIZED_SIZE = 3_037_000_499


@dataclass(frozen=True)
class Rank1Lattice:
    """Generating vector (reduced mod M) and lattice size M."""
    generator: Tuple[int, ...]
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"lattice size must be >= 1, got {self.size}")
        if len(self.generator) < 1:
            raise ValueError("generating vector must not be empty")
        if self.size > _MAX_VECTORIZED_SIZE:
            raise ValueError(f"lattice size {self.size} exceeds the supported maximum {_MAX_VECTORIZED_SIZE}")
        object.__setattr__(self, "generator", tuple(int(v) % self.size for v in self.generator))

    @property
    def dimension(self) -> int:
        return len(self.generator)

    @property
    def z(self) -> np.ndarray:
        return np.asarray(self.generator, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class SubsampledLattice:
    """A multiset of node indices of `base` (duplicates allowed)."""
    base: Rank1Lattice
    picks: np.ndarray = field(repr=False)

    def __post_init__(self):
        picks = np.asarray(self.picks, dtype=np.int64).ravel()
        if picks.size < 1:
            raise ValueError("a subsampled lattice needs at least one node")
        if picks.min() < 0 or picks.max() >= self.base.size:
            raise ValueError(f"node indices must lie in [0, {self.base.size})")
        picks.setflags(write=False)
        object.__setattr__(self, "picks", picks)

    @property
    def n(self) -> int:
        return self.picks.shape[0]

    @property
    def dimension(self) -> int:
        return self.base.dimension


# ============================================================================
# NODES AND RESIDUES
# ============================================================================

def node(lat: Rank1Lattice, i: int) -> np.ndarray:
    """Node i, computed with exact integer arithmetic before the division."""
    if not 0 <= i < lat.size:
        raise IndexError(f"node index {i} out of range for lattice size {lat.size}")
    return np.array([((i * z) % lat.size) / lat.size for z in lat.generator], dtype=np.float64)


def lattice_nodes(lat: Rank1Lattice, indices: Optional[np.ndarray] = None) -> np.ndarray:
    """Nodes for an index array (all M nodes when `indices` is None), shape (n, d)."""
    if indices is None:
        indices = np.arange(lat.size, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    return ((indices[:, None] * lat.z[None, :]) % lat.size) / lat.size


def residues(lat: Rank1Lattice, freqs: FrequencySet) -> np.ndarray:
    """<k, z> mod M for every frequency, in canonical order."""
    if freqs.dimension != lat.dimension:
        raise DimensionMismatchError(
            f"frequency set of dimension {freqs.dimension} for a {lat.dimension}-dimensional lattice"
        )
    M = lat.size
    acc = np.zeros(len(freqs), dtype=np.int64)
    for column, z in zip(freqs.array.T, lat.generator):
        acc = (acc + (column % M) * z) % M
    return acc


def is_reconstructing(lat: Rank1Lattice, freqs: FrequencySet) -> bool:
    """True iff the residues over `freqs` are pairwise distinct."""
    res = residues(lat, freqs)
    return np.unique(res).shape[0] == res.shape[0]


# ============================================================================
# PRIMES
# ============================================================================

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    candidate = max(2, n)
    while not is_prime(candidate):
        candidate += 1
    return candidate


# ============================================================================
# CONSTRUCTION
# ============================================================================

def axis_lattice(radius: int) -> Rank1Lattice:
    """Equispaced 1-D lattice reconstructing for {-R..R}: z = (1), M = 2^j >= 2R + 1."""
    size = 1
    while size < 2 * radius + 1:
        size *= 2
    return Rank1Lattice((1,), size)


def build_reconstructing(
    freqs: FrequencySet,
    seed: Seed = None,
    settings: Optional[LatticeSearchSettings] = None,
) -> Rank1Lattice:
    """
    Search a prime-size rank-1 lattice that is reconstructing for `freqs`.

    Raises:
        LatticeSearchError: if the retry schedule is exhausted.
    """
    settings = settings or LatticeSearchSettings()
    count = len(freqs)
    if count < 1:
        raise ValueError("cannot build a lattice for an empty frequency set")
    d = freqs.dimension
    rng = np.random.default_rng(seed)
    size = next_prime(max(math.ceil(settings.size_factor * count * count), count + 1))

    for _ in range(settings.max_rounds):
        for trial in range(settings.trials_per_size):
            if d == 1 and trial == 0:
                z = (1,)
            else:
                z = tuple(int(v) for v in rng.integers(0, size, size=d))
            LATTICE_TRIALS.inc()
            lat = Rank1Lattice(z, size)
            if is_reconstructing(lat, freqs):
                log.debug(f"reconstructing lattice for |I|={count}: M={size}, trial {trial + 1}")
                return lat
        log.debug(f"no reconstructing generator of size {size} after {settings.trials_per_size} trials")
        size = next_prime(2 * size)

    raise LatticeSearchError(
        f"no reconstructing lattice for |I|={count} after {settings.max_rounds} lattice sizes"
    )


def subsample(lat: Rank1Lattice, n: int, seed: Seed = None) -> SubsampledLattice:
    """n i.i.d. uniform node indices (with replacement), reproducible from `seed`."""
    if n < 1:
        raise ValueError(f"subsample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return SubsampledLattice(lat, rng.integers(0, lat.size, size=n, dtype=np.int64))


# ============================================================================
# BOUNDS AND DIAGNOSTICS
# ============================================================================

def min_subsample_count(set_size: int, t: float) -> int:
    """ceil(12 |I| (ln|I| + t))."""
    if set_size < 1:
        raise ValueError(f"set_size must be >= 1, got {set_size}")
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    return math.ceil(12 * set_size * (math.log(set_size) + t))


def empirical_mz(
    sampling: Union[Rank1Lattice, SubsampledLattice],
    freqs: FrequencySet,
    trials: int,
    seed: Seed = None,
) -> Tuple[float, float]:
    """
    Min and max of (1/n) sum_i |f(x^i)|^2 over random unit-norm polynomials on `freqs`.

    By Parseval every trial polynomial has L2 norm 1, so the pair estimates the
    Marcinkiewicz-Zygmund constants (A, B) of the node set.
    """
    from sft_engine.transform import lattice_evaluate, subsampled_evaluate

    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((len(freqs), trials)) + 1j * rng.standard_normal((len(freqs), trials))
    coeffs /= np.linalg.norm(coeffs, axis=0, keepdims=True)

    if isinstance(sampling, SubsampledLattice):
        values = subsampled_evaluate(coeffs, freqs, sampling)
    else:
        values = lattice_evaluate(coeffs, freqs, sampling)
    forms = np.mean(np.abs(values) ** 2, axis=0)
    return float(forms.min()), float(forms.max())


# ============================================================================
# TEXT FORMAT
# ============================================================================

def serialize_lattice(sampling: Union[Rank1Lattice, SubsampledLattice]) -> str:
    """
    "d M", then the generating vector; a subsample adds "n" and the n indices.
    """
    lat = sampling.base if isinstance(sampling, SubsampledLattice) else sampling
    lines = [f"{lat.dimension} {lat.size}", " ".join(str(v) for v in lat.generator)]
    if isinstance(sampling, SubsampledLattice):
        lines.append(str(sampling.n))
        lines.append(" ".join(str(int(v)) for v in sampling.picks))
    return "\n".join(lines) + "\n"


def parse_lattice(text: str) -> Union[Rank1Lattice, SubsampledLattice]:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    try:
        if len(rows) < 2 or len(rows[0]) != 2:
            raise FormatError("lattice header must be 'd M' followed by the generating vector")
        d, size = int(rows[0][0]), int(rows[0][1])
        generator = [int(v) for v in rows[1]]
        if len(generator) != d:
            raise FormatError(f"generating vector has {len(generator)} entries, header says {d}")
        lat = Rank1Lattice(tuple(generator), size)
        if len(rows) == 2:
            return lat
        n = int(rows[2][0])
        picks = [int(v) for row in rows[3:] for v in row]
        if len(picks) != n:
            raise FormatError(f"subsample announces {n} indices, found {len(picks)}")
        return SubsampledLattice(lat, np.asarray(picks, dtype=np.int64))
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed lattice descriptor: {exc}") from exc
