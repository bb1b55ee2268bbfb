"""
TEST FUNCTIONS - Periodized B-spline products with exact Fourier coefficients
================================================================================

The univariate building block of order m is

    N_m(x) = C_m * sum_k (-1)^k sinc(pi k / m)^m exp(2 pi i k x)

normalized so that ||N_m||_{L2(T)} = 1. Its closed form is a scaled,
centered cardinal B-spline:

    N_m(x) = C_m * m * B_m(m (x - 1/2)),  x in [0, 1)

where B_m is the cardinal B-spline of order m supported on [-m/2, m/2].
Values are computed from the closed form (scipy BSpline); the truncated
series is kept as `bspline_series_eval` for cross-checks.

The benchmark function in d = 10 sums three products over disjoint groups

    axes {0, 2, 7}     order 2
    axes {1, 4, 5, 9}  order 4
    axes {3, 6, 8}     order 6

Its coefficient at k is the sum of the group terms whose axes cover the
support of k; each such term is a product of univariate coefficients.

================================================================================
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.interpolate import BSpline

from sft_engine.errors import DimensionMismatchError
from sft_engine.index_sets import FrequencySet
from sft_engine.sft import SampledFunction
from sft_engine.transform import CoefficientVector

log = logging.getLogger("sft_engine.testfn")

Group = Tuple[Tuple[int, ...], int]   # (axes, order)

BENCHMARK_GROUPS: Tuple[Group, ...] = (
    ((0, 2, 7), 2),
    ((1, 4, 5, 9), 4),
    ((3, 6, 8), 6),
)
BENCHMARK_DIMENSION = 10

# series sums stop once the remaining tail is below this
_SERIES_TAIL = 1e-17


# ============================================================================
# UNIVARIATE B-SPLINES
# ============================================================================

def _check_order(m: int) -> None:
    if m < 1:
        raise ValueError(f"B-spline order must be >= 1, got {m}")


@lru_cache(maxsize=None)
def bspline_norm_const(m: int) -> float:
    """C_m = (sum_k sinc(pi k / m)^{2m})^{-1/2}."""
    _check_order(m)
    if m == 1:
        return 1.0
    # tail of sum_{|k| > K} (m / (pi k))^{2m} is below 2 (m/pi)^{2m} K^{1-2m} / (2m - 1)
    K = math.ceil((2 * (m / math.pi) ** (2 * m) / ((2 * m - 1) * _SERIES_TAIL)) ** (1 / (2 * m - 1)))
    k = np.arange(1, K + 1, dtype=np.float64)
    terms = np.sinc(k / m) ** (2 * m)
    return 1.0 / math.sqrt(1.0 + 2.0 * math.fsum(terms))


def bspline_coeff(m: int, k) -> np.ndarray:
    """C_m (-1)^k sinc(pi k / m)^m, vectorized over integer k; exactly 0 at nonzero multiples of m."""
    _check_order(m)
    k = np.asarray(k, dtype=np.int64)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    values = bspline_norm_const(m) * sign * np.sinc(k / m) ** m
    return np.where((k % m == 0) & (k != 0), 0.0, values)


@lru_cache(maxsize=None)
def bspline_abs_sum(m: int) -> float:
    """Upper bound on sum_k |coefficient of N_m| (series plus an integral tail bound)."""
    _check_order(m)
    if m == 1:
        return 1.0
    K = 1_000_000
    k = np.arange(1, K + 1, dtype=np.float64)
    head = math.fsum(np.abs(np.sinc(k / m)) ** m)
    tail = (m / math.pi) ** m * K ** (1 - m) / (m - 1)
    return bspline_norm_const(m) * (1.0 + 2.0 * (head + tail))


@lru_cache(maxsize=None)
def _centered_bspline(m: int) -> BSpline:
    return BSpline.basis_element(np.arange(m + 1, dtype=np.float64) - m / 2, extrapolate=False)


def bspline_eval(m: int, x) -> np.ndarray:
    """N_m at x (taken mod 1), closed form."""
    _check_order(m)
    x = np.mod(np.asarray(x, dtype=np.float64), 1.0)
    values = _centered_bspline(m)(m * (x - 0.5))
    return bspline_norm_const(m) * m * np.nan_to_num(values, nan=0.0)


def bspline_series_eval(m: int, x, terms: int) -> np.ndarray:
    """N_m at x from the symmetric series truncated to |k| <= terms."""
    _check_order(m)
    x = np.asarray(x, dtype=np.float64)
    k = np.arange(1, terms + 1)
    coeffs = bspline_coeff(m, k)
    phases = np.cos(2 * np.pi * np.multiply.outer(x, k))
    return bspline_coeff(m, 0) + 2.0 * phases @ coeffs


# ============================================================================
# MULTIVARIATE TEST FUNCTION
# ============================================================================

@dataclass(frozen=True)
class BSplineTestFunction:
    """Sum over disjoint axis groups of products of N_m."""
    groups: Tuple[Group, ...]
    dimension: int

    def __post_init__(self):
        seen = set()
        for axes, order in self.groups:
            _check_order(order)
            if not axes:
                raise ValueError("a factor group needs at least one axis")
            for a in axes:
                if not 0 <= a < self.dimension or a in seen:
                    raise ValueError(f"groups must be disjoint axes in [0, {self.dimension}), got {self.groups}")
                seen.add(a)

    @classmethod
    def benchmark(cls) -> "BSplineTestFunction":
        """The ten-dimensional benchmark function."""
        return cls(BENCHMARK_GROUPS, BENCHMARK_DIMENSION)

    @classmethod
    def reduced(cls, dimension: int) -> "BSplineTestFunction":
        """The benchmark function restricted to its groups' axes below `dimension`."""
        if not 1 <= dimension <= BENCHMARK_DIMENSION:
            raise ValueError(f"dimension must lie in [1, {BENCHMARK_DIMENSION}], got {dimension}")
        groups = []
        for axes, order in BENCHMARK_GROUPS:
            kept = tuple(a for a in axes if a < dimension)
            if kept:
                groups.append((kept, order))
        return cls(tuple(groups), dimension)

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.dimension:
            raise DimensionMismatchError(f"points of dimension {points.shape[1]} for a {self.dimension}-variate function")
        out = np.zeros(points.shape[0], dtype=np.float64)
        for axes, order in self.groups:
            out += np.prod(bspline_eval(order, points[:, list(axes)]), axis=1)
        return out

    def sampled(self, chunk_size: int = 65536) -> SampledFunction:
        return SampledFunction(self, self.dimension, chunk_size)

    # ------------------------------------------------------------------
    # coefficients and norms
    # ------------------------------------------------------------------

    def coefficients(self, freqs) -> np.ndarray:
        """Exact Fourier coefficients at the rows of `freqs` (FrequencySet or (N, d) array)."""
        keys = freqs.array if isinstance(freqs, FrequencySet) else np.atleast_2d(np.asarray(freqs, dtype=np.int64))
        if keys.shape[1] != self.dimension:
            raise DimensionMismatchError(f"frequencies of dimension {keys.shape[1]} for a {self.dimension}-variate function")
        out = np.zeros(keys.shape[0], dtype=np.float64)
        for axes, order in self.groups:
            outside = np.ones(self.dimension, dtype=bool)
            outside[list(axes)] = False
            covered = ~np.any(keys[:, outside] != 0, axis=1)
            term = np.prod(bspline_coeff(order, keys[:, list(axes)]), axis=1)
            out += np.where(covered, term, 0.0)
        return out

    def coefficient(self, k) -> float:
        return float(self.coefficients(np.asarray(k, dtype=np.int64)[None, :])[0])

    def group_means(self) -> np.ndarray:
        return np.array([bspline_norm_const(order) ** len(axes) for axes, order in self.groups])

    def sq_norm(self) -> float:
        """||f||^2: unit-norm group terms plus cross terms, which are products of means."""
        means = self.group_means()
        cross = (means.sum() ** 2 - np.sum(means ** 2)) / 2
        return len(self.groups) + 2.0 * cross

    def abs_coefficient_bound(self) -> float:
        """Upper bound on sum_k |f_k|."""
        return float(sum(bspline_abs_sum(order) ** len(axes) for axes, order in self.groups))

    # ------------------------------------------------------------------
    # error metrics
    # ------------------------------------------------------------------

    def relative_l2_error(self, approx: CoefficientVector) -> float:
        """||f - g||_L2 / ||f||_L2 for g supported on approx.support, via Parseval."""
        norm = self.sq_norm()
        if len(approx) == 0:
            return 1.0
        exact = self.coefficients(approx.support)
        fit = np.sum(np.abs(exact - approx.values) ** 2)
        truncation = max(0.0, norm - float(np.sum(exact ** 2)))
        return math.sqrt(fit + truncation) / math.sqrt(norm)

    def max_coeff_error(self, approx: CoefficientVector) -> float:
        """max_{k in support} |f_k - g_k| (0 for an empty support)."""
        if len(approx) == 0:
            return 0.0
        return float(np.max(np.abs(self.coefficients(approx.support) - approx.values)))


# ============================================================================
# BENCHMARK-FUNCTION SHORTCUTS
# ============================================================================

@lru_cache(maxsize=1)
def _benchmark() -> BSplineTestFunction:
    return BSplineTestFunction.benchmark()


def testfn_eval(x) -> np.ndarray:
    return _benchmark()(x)


def testfn_coeff(k) -> np.ndarray:
    return _benchmark().coefficients(k)


def testfn_sq_norm() -> float:
    return _benchmark().sq_norm()


def relative_l2_error(freqs: FrequencySet, approx: CoefficientVector) -> float:
    if approx.support != freqs:
        raise ValueError("approximation must be supported on the given frequency set")
    return _benchmark().relative_l2_error(approx)


def max_coeff_error(freqs: FrequencySet, approx: CoefficientVector) -> float:
    if approx.support != freqs:
        raise ValueError("approximation must be supported on the given frequency set")
    return _benchmark().max_coeff_error(approx)
