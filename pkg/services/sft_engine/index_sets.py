"""
INDEX SETS - Frequency sets, hyperbolic crosses and candidate products
================================================================================

Frequencies are integer vectors k in Z^d. A `FrequencySet` stores them as one
int64 array of shape (N, d), duplicate-free and in lexicographic order, so two
sets are equal exactly when their serialized forms are equal.

The search space Gamma is a hyperbolic cross

    { k in Z^d : prod_t max(1, |k_t|) <= R }

which is never materialized at full scale (8.8e9 elements for d=10, R=256).
The pipeline only needs:

    - membership of prefixes (k_1, ..., k_t)          -> contains_prefix
    - the projection onto one axis, {-R, ..., R}      -> hc_project_materialize
    - products of detected sets filtered by Gamma     -> candidate_product

TEXT FORMAT:
------------
    d N
    k_1 ... k_d        (N lines, lexicographically sorted)

================================================================================
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from sft_engine.errors import DimensionMismatchError, FormatError, InvalidAxesError

log = logging.getLogger("sft_engine.index_sets")

MultiIndex = Tuple[int, ...]
ArrayLike = Union[np.ndarray, Sequence[Sequence[int]]]


# ============================================================================
# FREQUENCY SET
# ============================================================================

class FrequencySet:
    """
    Immutable, canonically ordered set of frequencies of one dimension.

    EXAMPLE:
    --------
        s = FrequencySet([(1, 3), (1, 2), (1, 2)], dimension=2)
        list(s)              # [(1, 2), (1, 3)]
        s.index_of([(1, 3)]) # array([1])
    """

    __slots__ = ("_array", "_lookup")

    def __init__(self, elements: ArrayLike, dimension: Optional[int] = None):
        arr = np.asarray(elements, dtype=np.int64)
        if arr.size == 0:
            if dimension is None:
                dimension = arr.shape[1] if arr.ndim == 2 else None
            if dimension is None or dimension < 1:
                raise ValueError("dimension is required for an empty frequency set")
            arr = np.empty((0, dimension), dtype=np.int64)
        else:
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.ndim != 2:
                raise ValueError(f"frequencies must form a 2-D array, got shape {arr.shape}")
            if dimension is not None and arr.shape[1] != dimension:
                raise DimensionMismatchError(
                    f"frequencies have {arr.shape[1]} entries, expected {dimension}"
                )
            arr = _canonical(arr)
        arr.setflags(write=False)
        self._array = arr
        self._lookup = None

    @classmethod
    def empty(cls, dimension: int) -> "FrequencySet":
        return cls(np.empty((0, dimension), dtype=np.int64), dimension)

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> "FrequencySet":
        """Wrap an array already known to be canonical."""
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.int64)
        arr.setflags(write=False)
        obj._array = arr
        obj._lookup = None
        return obj

    # ------------------------------------------------------------------
    # container protocol
    # ------------------------------------------------------------------

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def dimension(self) -> int:
        return self._array.shape[1]

    def __len__(self) -> int:
        return self._array.shape[0]

    def __iter__(self) -> Iterator[MultiIndex]:
        return (tuple(int(v) for v in row) for row in self._array)

    def __contains__(self, k) -> bool:
        return tuple(int(v) for v in k) in self._index()

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrequencySet):
            return NotImplemented
        return self._array.shape == other._array.shape and bool(np.array_equal(self._array, other._array))

    def __hash__(self) -> int:
        return hash((self._array.shape, self._array.tobytes()))

    def __repr__(self) -> str:
        return f"FrequencySet(dimension={self.dimension}, size={len(self)})"

    def _index(self) -> dict:
        if self._lookup is None:
            self._lookup = {k: i for i, k in enumerate(self)}
        return self._lookup

    def index_of(self, keys: ArrayLike) -> np.ndarray:
        """Positions of `keys` in canonical order, -1 where absent."""
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, self.dimension)
        lookup = self._index()
        return np.fromiter(
            (lookup.get(tuple(int(v) for v in row), -1) for row in keys),
            dtype=np.int64,
            count=keys.shape[0],
        )

    def take(self, positions: Iterable[int]) -> "FrequencySet":
        """Subset by canonical positions (order of `positions` is irrelevant)."""
        positions = np.unique(np.asarray(list(positions), dtype=np.int64))
        return FrequencySet._trusted(self._array[positions].reshape(-1, self.dimension))

    def embed(self, axes: Sequence[int], dimension: int) -> "FrequencySet":
        """Place the entries on `axes` of a zero vector of length `dimension`."""
        axes = _check_axes(axes, dimension)
        if len(axes) != self.dimension:
            raise DimensionMismatchError(f"{len(axes)} axes for a {self.dimension}-dimensional set")
        out = np.zeros((len(self), dimension), dtype=np.int64)
        out[:, axes] = self._array
        return FrequencySet(out, dimension)

    # ------------------------------------------------------------------
    # text format
    # ------------------------------------------------------------------

    def serialize(self) -> str:
        lines = [f"{self.dimension} {len(self)}"]
        lines.extend(" ".join(str(int(v)) for v in row) for row in self._array)
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "FrequencySet":
        rows = [line.split() for line in text.splitlines() if line.strip()]
        if not rows or len(rows[0]) != 2:
            raise FormatError("frequency set header must be 'd N'")
        try:
            dimension, count = int(rows[0][0]), int(rows[0][1])
            body = [[int(v) for v in row] for row in rows[1:]]
        except ValueError as exc:
            raise FormatError(f"non-integer entry in frequency set: {exc}") from exc
        if dimension < 1 or count != len(body):
            raise FormatError(f"header announces {count} rows of dimension {dimension}, found {len(body)}")
        if any(len(row) != dimension for row in body):
            raise FormatError(f"every row must have {dimension} entries")
        return cls(np.asarray(body, dtype=np.int64).reshape(count, dimension), dimension)


def _canonical(arr: np.ndarray) -> np.ndarray:
    order = np.lexsort(arr.T[::-1])
    arr = arr[order]
    keep = np.ones(arr.shape[0], dtype=bool)
    keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
    return np.ascontiguousarray(arr[keep])


def _check_axes(axes: Sequence[int], dimension: int) -> Tuple[int, ...]:
    axes = tuple(int(a) for a in axes)
    if not axes:
        raise InvalidAxesError("axis list must not be empty")
    if any(b <= a for a, b in zip(axes, axes[1:])):
        raise InvalidAxesError(f"axes must be strictly increasing, got {list(axes)}")
    if axes[0] < 0 or axes[-1] >= dimension:
        raise InvalidAxesError(f"axes {list(axes)} out of range for dimension {dimension}")
    return axes


# ============================================================================
# SEARCH SPACES
# ============================================================================

class SearchSpace(Protocol):
    """What the pipeline needs from Gamma: prefix membership and axis projections."""

    @property
    def dimension(self) -> int: ...

    def contains_prefix(self, prefixes: np.ndarray) -> np.ndarray: ...

    def axis_projection(self, axis: int) -> FrequencySet: ...


@dataclass(frozen=True)
class HyperbolicCross:
    """{k in Z^d : prod_t max(1, |k_t|) <= radius}."""
    dimension: int
    radius: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")

    def contains(self, k: Sequence[int]) -> bool:
        return hc_contains(self, k)

    def contains_prefix(self, prefixes: np.ndarray) -> np.ndarray:
        """
        Vectorized membership of prefixes (N, t), t <= dimension.

        A prefix belongs to the projection of the cross onto its leading axes
        iff its own product is <= radius (pad with zeros to extend it).
        """
        prefixes = np.asarray(prefixes, dtype=np.int64)
        if prefixes.ndim != 2 or prefixes.shape[1] > self.dimension:
            raise DimensionMismatchError(
                f"prefixes of shape {prefixes.shape} for a {self.dimension}-dimensional cross"
            )
        return _capped_products(prefixes, self.radius) <= self.radius

    def axis_projection(self, axis: int) -> FrequencySet:
        return hc_project_materialize(self, axis)


def _capped_products(arr: np.ndarray, radius: int) -> np.ndarray:
    """Row products of max(1, |k_t|), saturated at radius + 1 (no overflow)."""
    cap = np.int64(radius + 1)
    prod = np.ones(arr.shape[0], dtype=np.int64)
    for col in arr.T:
        factor = np.minimum(np.maximum(np.abs(col), 1), cap)
        prod = np.minimum(prod * factor, cap)
    return prod


# ============================================================================
# OPERATIONS
# ============================================================================

def hc_contains(hc: HyperbolicCross, k: Sequence[int]) -> bool:
    """True iff prod max(1, |k_t|) <= R; stops as soon as the product exceeds R."""
    if len(k) != hc.dimension:
        raise DimensionMismatchError(f"frequency of length {len(k)} for dimension {hc.dimension}")
    prod = 1
    for entry in k:
        prod *= max(1, abs(int(entry)))
        if prod > hc.radius:
            return False
    return True


@lru_cache(maxsize=None)
def _count(d: int, radius: int) -> int:
    if d == 0:
        return 1
    total = _count(d - 1, radius)  # k = 0
    m = 1
    # group the m in [m, m_last] sharing the quotient radius // m
    while m <= radius:
        q = radius // m
        m_last = radius // q
        total += 2 * (m_last - m + 1) * _count(d - 1, q)
        m = m_last + 1
    return total


def hc_count(d: int, radius: int) -> int:
    """
    Exact size of the hyperbolic cross, as a Python int.

        N(d, R) = sum_{k=-R}^{R} N(d-1, R // max(1, |k|)),  N(0, .) = 1
    """
    if d < 1 or radius < 1:
        raise ValueError(f"need d >= 1 and radius >= 1, got d={d}, radius={radius}")
    return _count(d, radius)


def project(freqs: FrequencySet, dims: Sequence[int]) -> FrequencySet:
    """{(k_t)_{t in dims} : k in freqs}, duplicates removed."""
    dims = _check_axes(dims, freqs.dimension)
    if len(freqs) == 0:
        return FrequencySet.empty(len(dims))
    return FrequencySet(freqs.array[:, list(dims)], len(dims))


def hc_project_materialize(hc: HyperbolicCross, axis: int) -> FrequencySet:
    """Projection of the cross onto one axis: {-R, ..., R}."""
    _check_axes([axis], hc.dimension)
    values = np.arange(-hc.radius, hc.radius + 1, dtype=np.int64)
    return FrequencySet._trusted(values[:, None])


def candidate_product(previous: FrequencySet, axis_set: FrequencySet, hc: SearchSpace) -> FrequencySet:
    """(previous x axis_set) intersected with the projection of Gamma onto the leading t axes."""
    if axis_set.dimension != 1:
        raise DimensionMismatchError(f"axis set must be 1-dimensional, got {axis_set.dimension}")
    t = previous.dimension + 1
    if t > hc.dimension:
        raise DimensionMismatchError(f"product of dimension {t} exceeds search space dimension {hc.dimension}")
    if len(previous) == 0 or len(axis_set) == 0:
        return FrequencySet.empty(t)
    left = np.repeat(previous.array, len(axis_set), axis=0)
    right = np.tile(axis_set.array, (len(previous), 1))
    product = np.hstack([left, right])
    keep = hc.contains_prefix(product)
    # repeat/tile of two canonical sets is already lexicographic
    return FrequencySet._trusted(product[keep])


# ============================================================================
# SMALL-SCALE HELPERS (enumeration and uniform sampling)
# ============================================================================

@lru_cache(maxsize=None)
def _enumerate(d: int, radius: int) -> np.ndarray:
    if d == 0:
        return np.zeros((1, 0), dtype=np.int64)
    blocks = []
    for k in range(-radius, radius + 1):
        tail = _enumerate(d - 1, radius // max(1, abs(k)))
        head = np.full((tail.shape[0], 1), k, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def hc_enumerate(hc: HyperbolicCross, max_size: int = 10_000_000) -> FrequencySet:
    """Materialize a small hyperbolic cross (refuses more than `max_size` elements)."""
    size = hc_count(hc.dimension, hc.radius)
    if size > max_size:
        raise ValueError(f"hyperbolic cross has {size} elements, refusing to materialize more than {max_size}")
    return FrequencySet._trusted(_enumerate(hc.dimension, hc.radius))


@lru_cache(maxsize=None)
def _coordinate_table(d: int, radius: int) -> Tuple[np.ndarray, np.ndarray]:
    """Values of the leading coordinate and cumulative counts of their completions."""
    values = np.arange(-radius, radius + 1, dtype=np.int64)
    counts = np.array([_count(d - 1, radius // max(1, abs(int(k)))) for k in values], dtype=np.int64)
    return values, np.cumsum(counts)


def hc_sample(hc: HyperbolicCross, n: int, rng: np.random.Generator) -> FrequencySet:
    """
    Draw `n` distinct frequencies uniformly from the cross without enumerating it.

    Each coordinate is chosen with probability proportional to the number of
    ways the remaining coordinates can be completed.
    """
    total = hc_count(hc.dimension, hc.radius)
    if n > total:
        raise ValueError(f"cannot draw {n} distinct frequencies from a cross of size {total}")
    drawn = set()
    while len(drawn) < n:
        radius = hc.radius
        k = []
        for remaining in range(hc.dimension, 0, -1):
            values, cumulative = _coordinate_table(remaining, radius)
            u = int(rng.integers(0, int(cumulative[-1])))
            value = int(values[np.searchsorted(cumulative, u, side="right")])
            k.append(value)
            radius //= max(1, abs(value))
        drawn.add(tuple(k))
    return FrequencySet(sorted(drawn), hc.dimension)
