import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sft_engine.errors import DimensionMismatchError, FormatError, InvalidAxesError
from sft_engine.index_sets import (
    FrequencySet,
    HyperbolicCross,
    candidate_product,
    hc_contains,
    hc_count,
    hc_enumerate,
    hc_project_materialize,
    hc_sample,
    project,
)


def brute_force_cross(d, radius):
    box = range(-radius, radius + 1)
    return [k for k in itertools.product(box, repeat=d) if np.prod([max(1, abs(v)) for v in k]) <= radius]


# ============================================================================
# FrequencySet
# ============================================================================

def test_frequency_set_is_canonical_and_duplicate_free():
    s = FrequencySet([(1, 3), (1, 2), (1, 2)], dimension=2)
    assert list(s) == [(1, 2), (1, 3)]
    assert s.index_of([(1, 3), (0, 0)]).tolist() == [1, -1]
    assert (1, 2) in s and (2, 1) not in s


def test_frequency_set_array_is_read_only():
    s = FrequencySet([(0, 1)])
    with pytest.raises(ValueError):
        s.array[0, 0] = 5


def test_empty_set_needs_dimension():
    with pytest.raises(ValueError):
        FrequencySet([])
    assert len(FrequencySet.empty(3)) == 0
    assert FrequencySet.empty(3).dimension == 3


def test_dimension_mismatch_is_reported():
    with pytest.raises(DimensionMismatchError):
        FrequencySet([(1, 2)], dimension=3)


def test_embed_places_entries_on_axes():
    s = FrequencySet([(1, -2)]).embed([0, 3], 4)
    assert list(s) == [(1, 0, 0, -2)]


def test_serialize_and_parse():
    s = FrequencySet([(3, -1), (0, 0), (-2, 5)])
    text = s.serialize()
    assert text.splitlines()[0] == "2 3"
    assert text.splitlines()[1:] == ["-2 5", "0 0", "3 -1"]
    assert FrequencySet.parse(text) == s


@given(st.lists(st.tuples(*[st.integers(-10 ** 6, 10 ** 6)] * 3), max_size=30))
def test_serialize_parse_round_trip(rows):
    s = FrequencySet(rows, dimension=3)
    back = FrequencySet.parse(s.serialize())
    assert back == s and back.dimension == 3


@pytest.mark.parametrize("text", ["", "2", "2 2\n1 2\n", "2 1\n1 x\n", "2 1\n1 2 3\n"])
def test_parse_rejects_malformed_text(text):
    with pytest.raises(FormatError):
        FrequencySet.parse(text)


@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=40))
def test_canonical_order_is_lexicographic(rows):
    s = FrequencySet(rows, dimension=2)
    assert list(s) == sorted(set(rows))


# ============================================================================
# Hyperbolic cross
# ============================================================================

def test_hc_contains_examples():
    assert hc_contains(HyperbolicCross(10, 256), [0] * 10)
    assert not hc_contains(HyperbolicCross(2, 2), [2, 2])
    assert hc_contains(HyperbolicCross(2, 2), [-2, 1])


def test_hc_contains_does_not_overflow():
    big = [2 ** 40] * 4
    assert not hc_contains(HyperbolicCross(4, 256), big)
    assert not HyperbolicCross(4, 256).contains_prefix(np.array([big]))[0]


@pytest.mark.parametrize("d,radius,expected", [(1, 4, 9), (2, 2, 21), (10, 256, 8_827_703_433)])
def test_hc_count_examples(d, radius, expected):
    assert hc_count(d, radius) == expected


@pytest.mark.parametrize("d,radius", [(1, 7), (2, 5), (3, 4), (4, 3)])
def test_hc_count_matches_brute_force(d, radius):
    assert hc_count(d, radius) == len(brute_force_cross(d, radius))


@pytest.mark.parametrize("d,radius", [(2, 3), (3, 4)])
def test_hc_enumerate_matches_brute_force(d, radius):
    assert hc_enumerate(HyperbolicCross(d, radius)) == FrequencySet(brute_force_cross(d, radius), d)


def test_hc_enumerate_refuses_huge_crosses():
    with pytest.raises(ValueError):
        hc_enumerate(HyperbolicCross(10, 256))


def test_hc_count_rejects_invalid_arguments():
    with pytest.raises(ValueError):
        hc_count(0, 4)


def test_hc_sample_draws_distinct_members(rng):
    hc = HyperbolicCross(6, 32)
    sample = hc_sample(hc, 50, rng)
    assert len(sample) == 50
    assert all(hc.contains(k) for k in sample)


def test_hc_sample_covers_small_cross(rng):
    hc = HyperbolicCross(2, 2)
    assert hc_sample(hc, 21, rng) == hc_enumerate(hc)


# ============================================================================
# Projections and candidate products
# ============================================================================

def test_project_examples():
    assert list(project(FrequencySet([(1, 2), (1, 3)]), [0])) == [(1,)]
    assert list(project(FrequencySet([(0, 0), (1, 2)]), [1])) == [(0,), (2,)]
    assert list(project(hc_enumerate(HyperbolicCross(2, 2)), [0])) == [(k,) for k in range(-2, 3)]


@pytest.mark.parametrize("outer,inner", [([0, 2, 3], [0, 2]), ([1, 2, 3], [1]), ([0, 1, 2, 3], [0, 3])])
@given(rows=st.lists(st.tuples(*[st.integers(-9, 9)] * 4), min_size=1, max_size=25))
def test_projections_compose(outer, inner, rows):
    s = FrequencySet(rows, dimension=4)
    assert project(project(s, outer), inner) == project(s, [outer[i] for i in inner])


@pytest.mark.parametrize("dims", [[], [1, 0], [0, 0], [2]])
def test_project_rejects_invalid_axes(dims):
    with pytest.raises(InvalidAxesError):
        project(FrequencySet([(1, 2)]), dims)


def test_axis_projection_examples():
    assert len(hc_project_materialize(HyperbolicCross(10, 256), 2)) == 513
    assert list(HyperbolicCross(2, 2).axis_projection(0)) == [(k,) for k in range(-2, 3)]
    assert list(hc_project_materialize(HyperbolicCross(1, 4), 0)) == [(k,) for k in range(-4, 5)]


def test_candidate_product_examples():
    hc = HyperbolicCross(2, 2)
    zero = FrequencySet([(0,)])
    assert list(candidate_product(zero, zero, hc)) == [(0, 0)]
    two = FrequencySet([(2,)])
    assert len(candidate_product(two, two, hc)) == 0
    left = FrequencySet([(-1,), (0,)])
    right = FrequencySet([(-2,), (0,)])
    assert list(candidate_product(left, right, hc)) == [(-1, -2), (-1, 0), (0, -2), (0, 0)]


@pytest.mark.parametrize("d,radius", [(2, 1), (2, 4), (3, 2), (3, 4)])
def test_candidate_product_of_full_projections_is_the_cross(d, radius):
    hc = HyperbolicCross(d, radius)
    everything = hc_enumerate(hc)
    previous = project(everything, list(range(d - 1)))
    product = candidate_product(previous, hc.axis_projection(d - 1), hc)
    assert np.all(everything.index_of(product.array) >= 0)
    assert product == everything


@pytest.mark.parametrize("d,radius", [(2, 3), (3, 4)])
def test_candidate_product_of_subsets_stays_inside_the_cross(d, radius, rng):
    hc = HyperbolicCross(d, radius)
    everything = hc_enumerate(hc)
    previous = project(everything, list(range(d - 1)))
    previous = previous.take(rng.choice(len(previous), size=max(1, len(previous) // 2), replace=False))
    axis_set = hc.axis_projection(d - 1).take(rng.choice(2 * radius + 1, size=radius, replace=False))
    product = candidate_product(previous, axis_set, hc)
    assert np.all(everything.index_of(product.array) >= 0)


@given(
    st.lists(st.tuples(st.integers(-8, 8), st.integers(-8, 8)), min_size=1, max_size=15),
    st.lists(st.integers(-8, 8), min_size=1, max_size=10),
)
def test_candidate_product_is_filtered_product(prev_rows, axis_values):
    hc = HyperbolicCross(4, 8)
    previous = FrequencySet(prev_rows, dimension=2)
    axis_set = FrequencySet([(v,) for v in axis_values], dimension=1)
    product = candidate_product(previous, axis_set, hc)
    expected = [
        p + a for p in previous for a in axis_set
        if np.prod([max(1, abs(v)) for v in p + a]) <= 8
    ]
    assert list(product) == sorted(expected)
