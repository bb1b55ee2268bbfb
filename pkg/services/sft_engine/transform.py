"""
TRANSFORMS - Fast and naive Fourier matrices on lattices and point sets
================================================================================

All operators represent the matrix

    L = ( exp(2 pi i <k, x^i>) )_{i = nodes, k in I}

and its adjoint L*. On a rank-1 lattice <k, x^i> = i <k, z> / M (mod 1), so

    L c   = M-point inverse DFT of the coefficients binned by <k, z> mod M
    L* v  = M-point forward DFT of v, gathered at the bins

at cost O(M log M + d |I|). Bins may collide when the lattice is not
reconstructing for I; evaluation then adds into the shared bin and the adjoint
reads it once per colliding frequency, so both stay exact linear maps.

Lattice sizes from the search are prime, so scipy.fft (pocketfft, Bluestein
for awkward lengths) is used rather than a radix-2 transform.

Every function accepts a single vector or a batch (one right-hand side per
column). The naive operators work in row chunks so memory stays bounded.

================================================================================
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sp_fft
from scipy.sparse.linalg import LinearOperator

from sft_engine.errors import DimensionMismatchError
from sft_engine.index_sets import FrequencySet
from sft_engine.lattice import Rank1Lattice, SubsampledLattice, residues

log = logging.getLogger("sft_engine.transform")

DEFAULT_CHUNK = 4096
# upper bound on M x columns held by one batched lattice FFT
FFT_BATCH_ELEMENTS = 1 << 22


# ============================================================================
# DATA CONTAINERS
# ============================================================================

@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Complex amplitudes aligned with the canonical order of `support`."""
    support: FrequencySet
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128).ravel()
        if values.shape[0] != len(self.support):
            raise DimensionMismatchError(
                f"{values.shape[0]} coefficients for a support of size {len(self.support)}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def empty(cls, dimension: int) -> "CoefficientVector":
        return cls(FrequencySet.empty(dimension), np.empty(0, dtype=np.complex128))

    def __len__(self) -> int:
        return len(self.support)

    def top(self, count: int) -> "CoefficientVector":
        """The `count` largest magnitudes; ties keep canonical order."""
        order = np.lexsort((np.arange(len(self)), -np.abs(self.values)))[:count]
        keep = np.sort(order)
        return CoefficientVector(self.support.take(keep), self.values[keep])

    def restrict(self, freqs: FrequencySet) -> "CoefficientVector":
        """Values on `freqs` (zero where a frequency is not in the support)."""
        positions = self.support.index_of(freqs.array)
        values = np.where(positions >= 0, self.values[np.maximum(positions, 0)], 0.0)
        return CoefficientVector(freqs, values)

    def as_dict(self) -> dict:
        return {k: complex(v) for k, v in zip(self.support, self.values)}


@dataclass(frozen=True, eq=False)
class SampleVector:
    """Samples f(x^i); `nodes` holds points (n, d) or lattice node indices (n,)."""
    nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if np.shape(self.nodes)[0] != np.shape(self.values)[0]:
            raise DimensionMismatchError(
                f"{np.shape(self.nodes)[0]} nodes but {np.shape(self.values)[0]} values"
            )

    def __len__(self) -> int:
        return np.shape(self.values)[0]


# ============================================================================
# BIN HELPERS
# ============================================================================

def _bin_evaluate(coeffs: np.ndarray, bins: np.ndarray, size: int) -> np.ndarray:
    hat = np.zeros((size,) + coeffs.shape[1:], dtype=np.complex128)
    np.add.at(hat, bins, coeffs)
    # norm="forward" leaves the inverse transform unscaled: sum_b hat_b e^{2 pi i i b / M}
    return sp_fft.ifft(hat, axis=0, norm="forward")


def _bin_adjoint(values: np.ndarray, bins: np.ndarray) -> np.ndarray:
    return sp_fft.fft(values, axis=0)[bins]


def _as_coeffs(coeffs, freqs: FrequencySet) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape[0] != len(freqs):
        raise DimensionMismatchError(f"{coeffs.shape[0]} coefficients for {len(freqs)} frequencies")
    return coeffs


def _scatter(values: np.ndarray, picks: np.ndarray, size: int) -> np.ndarray:
    if values.ndim == 1:
        return (np.bincount(picks, weights=values.real, minlength=size)
                + 1j * np.bincount(picks, weights=values.imag, minlength=size))
    full = np.zeros((size,) + values.shape[1:], dtype=np.complex128)
    np.add.at(full, picks, values)
    return full


# ============================================================================
# LATTICE OPERATORS
# ============================================================================

def lattice_evaluate(coeffs, freqs: FrequencySet, lat: Rank1Lattice) -> np.ndarray:
    """g(x^i) = sum_k c_k exp(2 pi i <k, x^i>) at all M nodes."""
    coeffs = _as_coeffs(coeffs, freqs)
    return _bin_evaluate(coeffs, residues(lat, freqs), lat.size)


def lattice_adjoint(values, freqs: FrequencySet, lat: Rank1Lattice) -> np.ndarray:
    """(L* v)_k = sum_i exp(-2 pi i <k, x^i>) v_i."""
    values = np.asarray(values, dtype=np.complex128)
    if values.shape[0] != lat.size:
        raise DimensionMismatchError(f"{values.shape[0]} values for a lattice of size {lat.size}")
    return _bin_adjoint(values, residues(lat, freqs))


def subsampled_evaluate(coeffs, freqs: FrequencySet, sub: SubsampledLattice) -> np.ndarray:
    """lattice_evaluate restricted to the picked nodes (duplicates repeated)."""
    return lattice_evaluate(coeffs, freqs, sub.base)[sub.picks]


def subsampled_adjoint(values, freqs: FrequencySet, sub: SubsampledLattice) -> np.ndarray:
    """Adjoint of subsampled_evaluate; duplicate picks accumulate."""
    values = np.asarray(values, dtype=np.complex128)
    if values.shape[0] != sub.n:
        raise DimensionMismatchError(f"{values.shape[0]} values for a subsample of size {sub.n}")
    full = _scatter(values, sub.picks, sub.base.size)
    return _bin_adjoint(full, residues(sub.base, freqs))


# ============================================================================
# NAIVE OPERATORS (arbitrary points)
# ============================================================================

def _check_points(points, freqs: FrequencySet) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None] if freqs.dimension == 1 else points[None, :]
    if points.shape[1] != freqs.dimension:
        raise DimensionMismatchError(
            f"points of dimension {points.shape[1]} for frequencies of dimension {freqs.dimension}"
        )
    return points


def naive_evaluate(coeffs, freqs: FrequencySet, points, chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    """Direct O(N |I| d) evaluation at arbitrary points."""
    coeffs = _as_coeffs(coeffs, freqs)
    points = _check_points(points, freqs)
    kf = freqs.array.T.astype(np.float64)
    out = np.empty((points.shape[0],) + coeffs.shape[1:], dtype=np.complex128)
    for start in range(0, points.shape[0], chunk_size):
        block = points[start:start + chunk_size]
        out[start:start + chunk_size] = np.exp(2j * np.pi * (block @ kf)) @ coeffs
    return out


def naive_adjoint(values, freqs: FrequencySet, points, chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    """Conjugate transpose of naive_evaluate."""
    points = _check_points(points, freqs)
    values = np.asarray(values, dtype=np.complex128)
    if values.shape[0] != points.shape[0]:
        raise DimensionMismatchError(f"{values.shape[0]} values for {points.shape[0]} points")
    kf = freqs.array.T.astype(np.float64)
    out = np.zeros((len(freqs),) + values.shape[1:], dtype=np.complex128)
    for start in range(0, points.shape[0], chunk_size):
        block = points[start:start + chunk_size]
        out += np.exp(-2j * np.pi * (block @ kf)).T @ values[start:start + chunk_size]
    return out


# ============================================================================
# LINEAR OPERATOR WRAPPERS (consumed by the solver)
# ============================================================================

def _by_columns(apply, X: np.ndarray, size: int, out_rows: int, limit: int) -> np.ndarray:
    """apply(X) in column blocks so that size x block stays within `limit`."""
    X = np.asarray(X, dtype=np.complex128)
    step = max(1, limit // max(size, 1))
    if X.ndim == 1 or X.shape[1] <= step:
        return apply(X)
    out = np.empty((out_rows, X.shape[1]), dtype=np.complex128)
    for start in range(0, X.shape[1], step):
        out[:, start:start + step] = apply(X[:, start:start + step])
    return out


class LatticeOperator(LinearOperator):
    """L on a full rank-1 lattice, bins computed once."""

    def __init__(self, freqs: FrequencySet, lat: Rank1Lattice, batch_elements: int = FFT_BATCH_ELEMENTS):
        self.freqs = freqs
        self.lattice = lat
        self.bins = residues(lat, freqs)
        self.batch_elements = batch_elements
        super().__init__(dtype=np.complex128, shape=(lat.size, len(freqs)))

    def _matmat(self, X):
        M = self.lattice.size
        return _by_columns(lambda B: _bin_evaluate(B, self.bins, M), X, M, M, self.batch_elements)

    def _rmatmat(self, Y):
        M = self.lattice.size
        return _by_columns(lambda B: _bin_adjoint(B, self.bins), Y, M, len(self.freqs), self.batch_elements)

    def _matvec(self, x):
        return self._matmat(x)

    def _rmatvec(self, y):
        return self._rmatmat(y)


class SubsampledOperator(LinearOperator):
    """L restricted to the picked nodes of a subsampled lattice."""

    def __init__(self, freqs: FrequencySet, sub: SubsampledLattice, batch_elements: int = FFT_BATCH_ELEMENTS):
        self.freqs = freqs
        self.sampling = sub
        self.bins = residues(sub.base, freqs)
        self.batch_elements = batch_elements
        super().__init__(dtype=np.complex128, shape=(sub.n, len(freqs)))

    def _evaluate(self, X):
        return _bin_evaluate(X, self.bins, self.sampling.base.size)[self.sampling.picks]

    def _adjoint(self, Y):
        return _bin_adjoint(_scatter(Y, self.sampling.picks, self.sampling.base.size), self.bins)

    def _matmat(self, X):
        M = self.sampling.base.size
        return _by_columns(self._evaluate, X, M, self.sampling.n, self.batch_elements)

    def _rmatmat(self, Y):
        M = self.sampling.base.size
        return _by_columns(self._adjoint, Y, M, len(self.freqs), self.batch_elements)

    def _matvec(self, x):
        return self._matmat(x)

    def _rmatvec(self, y):
        return self._rmatmat(y)


class PointOperator(LinearOperator):
    """L at arbitrary points; no fast algorithm, chunked dense products."""

    def __init__(self, freqs: FrequencySet, points: np.ndarray, chunk_size: int = DEFAULT_CHUNK):
        self.freqs = freqs
        self.points = _check_points(points, freqs)
        self.chunk_size = chunk_size
        super().__init__(dtype=np.complex128, shape=(self.points.shape[0], len(freqs)))

    def _matmat(self, X):
        return naive_evaluate(X, self.freqs, self.points, self.chunk_size)

    def _rmatmat(self, Y):
        return naive_adjoint(Y, self.freqs, self.points, self.chunk_size)

    def _matvec(self, x):
        return self._matmat(x)

    def _rmatvec(self, y):
        return self._rmatmat(y)

