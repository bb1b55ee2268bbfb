import math
from decimal import Decimal, localcontext

import numpy as np
import pytest
from scipy.stats import chisquare

from sft_engine.config import LatticeSearchSettings
from sft_engine.errors import FormatError, LatticeSearchError
from sft_engine.index_sets import FrequencySet, HyperbolicCross, hc_enumerate
from sft_engine.lattice import (
    Rank1Lattice,
    SubsampledLattice,
    axis_lattice,
    build_reconstructing,
    empirical_mz,
    is_prime,
    is_reconstructing,
    lattice_nodes,
    min_subsample_count,
    next_prime,
    node,
    parse_lattice,
    residues,
    serialize_lattice,
    subsample,
)


# ============================================================================
# Nodes and residues
# ============================================================================

def test_node_examples():
    lat = Rank1Lattice((1, 3), 8)
    assert node(lat, 0).tolist() == [0.0, 0.0]
    assert node(lat, 3).tolist() == [3 / 8, 1 / 8]
    with pytest.raises(IndexError):
        node(lat, 8)


def test_lattice_nodes_match_single_nodes():
    lat = Rank1Lattice((1, 5, 11), 17)
    nodes = lattice_nodes(lat)
    assert nodes.shape == (17, 3)
    for i in (0, 4, 16):
        np.testing.assert_array_equal(nodes[i], node(lat, i))
    assert np.all((nodes >= 0) & (nodes < 1))


def test_generator_is_reduced_modulo_size():
    assert Rank1Lattice((9, -1), 8).generator == (1, 7)


def test_reconstructing_examples():
    assert is_reconstructing(Rank1Lattice((1,), 8), FrequencySet([(k,) for k in range(-3, 4)]))
    assert not is_reconstructing(Rank1Lattice((1,), 4), FrequencySet([(0,), (4,)]))


def exactly_integrates_differences(lat, freqs):
    """Node averages of exp(2 pi i <h, x>) vanish for every nonzero h in the difference set."""
    k = freqs.array
    diffs = (k[:, None, :] - k[None, :, :]).reshape(-1, k.shape[1])
    diffs = diffs[np.any(diffs != 0, axis=1)]
    if len(diffs) == 0:
        return True
    averages = np.exp(2j * np.pi * lattice_nodes(lat) @ diffs.T).mean(axis=0)
    return bool(np.all(np.abs(averages) < 1e-9))


def test_reconstructing_matches_exponential_sums():
    rng = np.random.default_rng(13)
    outcomes = set()
    for _ in range(200):
        d = int(rng.integers(1, 4))
        size = int(rng.integers(2, 65))
        freqs = FrequencySet(rng.integers(-5, 6, size=(int(rng.integers(1, 9)), d)), dimension=d)
        lat = Rank1Lattice(tuple(int(v) for v in rng.integers(0, size, size=d)), size)
        expected = exactly_integrates_differences(lat, freqs)
        assert is_reconstructing(lat, freqs) == expected
        outcomes.add(expected)
    assert outcomes == {True, False}


def test_reconstructing_small_examples():
    freqs = FrequencySet([(0, 0), (1, 0), (0, 1)])
    assert not is_reconstructing(Rank1Lattice((1, 1), 2), freqs)
    assert not exactly_integrates_differences(Rank1Lattice((1, 1), 2), freqs)
    assert is_reconstructing(Rank1Lattice((1, 2), 5), freqs)
    assert exactly_integrates_differences(Rank1Lattice((1, 2), 5), freqs)


def test_residues_reduce_negative_frequencies():
    lat = Rank1Lattice((1, 3), 7)
    assert residues(lat, FrequencySet([(-1, 0), (0, -1)])).tolist() == [6, 4]


# ============================================================================
# Primes
# ============================================================================

def test_is_prime_matches_sieve():
    limit = 2000
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(limit ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    assert [n for n in range(limit) if is_prime(n)] == np.flatnonzero(sieve).tolist()


def test_is_prime_large_values():
    assert is_prime(2 ** 61 - 1)
    assert not is_prime(3_215_031_751)  # strong pseudoprime to bases 2, 3, 5, 7
    assert next_prime(2 ** 31) == 2 ** 31 + 11


# ============================================================================
# Construction
# ============================================================================

def test_axis_lattice_is_power_of_two():
    lat = axis_lattice(256)
    assert lat.size == 1024 and lat.generator == (1,)
    assert is_reconstructing(lat, FrequencySet([(k,) for k in range(-256, 257)]))


def test_build_reconstructing_small_cross():
    freqs = hc_enumerate(HyperbolicCross(2, 4))
    lat = build_reconstructing(freqs, seed=3)
    assert is_reconstructing(lat, freqs)
    assert is_prime(lat.size)
    assert lat.size >= 2 * len(freqs) ** 2


def test_build_reconstructing_one_dimensional_uses_unit_generator():
    freqs = FrequencySet([(k,) for k in range(-4, 5)])
    lat = build_reconstructing(freqs, seed=0)
    assert lat.generator == (1,)
    assert lat.size == next_prime(2 * 81)


def test_build_reconstructing_is_seeded(random_subset):
    freqs = random_subset(HyperbolicCross(3, 16), 20)
    assert build_reconstructing(freqs, seed=7) == build_reconstructing(freqs, seed=7)


def test_build_reconstructing_gives_up():
    # M = 3 maps (0, 0) and (3, 0) to the same residue for every generator
    freqs = FrequencySet([(0, 0), (3, 0)])
    settings = LatticeSearchSettings(size_factor=0.01, trials_per_size=2, max_rounds=1)
    with pytest.raises(LatticeSearchError):
        build_reconstructing(freqs, seed=0, settings=settings)


def test_subsample_is_reproducible():
    lat = Rank1Lattice((1, 7), 101)
    a, b = subsample(lat, 40, seed=5), subsample(lat, 40, seed=5)
    np.testing.assert_array_equal(a.picks, b.picks)
    assert a.n == 40 and np.all(a.picks < 101)


def test_subsample_draws_nodes_uniformly():
    lat = Rank1Lattice((1, 5), 16)
    counts = np.bincount(subsample(lat, 100_000, seed=11).picks, minlength=16)
    assert counts.sum() == 100_000
    assert chisquare(counts).pvalue > 1e-4


def test_subsampled_lattice_validates_indices():
    lat = Rank1Lattice((1,), 10)
    with pytest.raises(ValueError):
        SubsampledLattice(lat, np.array([0, 10]))
    with pytest.raises(ValueError):
        SubsampledLattice(lat, np.array([], dtype=np.int64))


# ============================================================================
# Bounds
# ============================================================================

@pytest.mark.parametrize("size,t,expected", [
    (1, 1.0, 12),
    (64, 3.0, 5499),
    (64, math.log(40), math.ceil(12 * 64 * (math.log(64) + math.log(40)))),
])
def test_min_subsample_count(size, t, expected):
    assert min_subsample_count(size, t) == expected


def test_min_subsample_count_matches_high_precision_evaluation():
    rng = np.random.default_rng(17)
    with localcontext() as ctx:
        ctx.prec = 50
        for _ in range(20):
            size, t = int(rng.integers(1, 100_000)), float(rng.uniform(0.01, 10.0))
            exact = 12 * size * (Decimal(size).ln() + Decimal(t))
            assert min_subsample_count(size, t) == math.ceil(exact)


def test_min_subsample_count_rejects_invalid_input():
    with pytest.raises(ValueError):
        min_subsample_count(0, 1.0)
    with pytest.raises(ValueError):
        min_subsample_count(4, 0.0)


def test_full_reconstructing_lattice_has_unit_mz_constants():
    freqs = hc_enumerate(HyperbolicCross(2, 4))
    lat = build_reconstructing(freqs, seed=1)
    low, high = empirical_mz(lat, freqs, trials=20, seed=2)
    assert low == pytest.approx(1.0, abs=1e-12)
    assert high == pytest.approx(1.0, abs=1e-12)


@pytest.mark.slow
def test_subsampled_lattice_satisfies_mz_bounds(random_subset):
    freqs = random_subset(HyperbolicCross(3, 16), 64)
    lat = build_reconstructing(freqs, seed=11)
    n = min_subsample_count(64, math.log(40))
    successes = 0
    for draw in range(20):
        low, high = empirical_mz(subsample(lat, n, seed=draw), freqs, trials=200, seed=100 + draw)
        successes += 0.5 <= low and high <= 1.5
    assert successes >= 17


# ============================================================================
# Text format
# ============================================================================

def test_lattice_descriptor_round_trip():
    lat = Rank1Lattice((1, 33, 57), 101)
    assert parse_lattice(serialize_lattice(lat)) == lat
    sub = subsample(lat, 5, seed=1)
    parsed = parse_lattice(serialize_lattice(sub))
    assert isinstance(parsed, SubsampledLattice)
    np.testing.assert_array_equal(parsed.picks, sub.picks)


@pytest.mark.parametrize("text", ["", "2 7\n", "2 7\n1\n", "2 7\n1 2\n3\n0 1\n", "x 7\n1\n"])
def test_parse_lattice_rejects_malformed_text(text):
    with pytest.raises(FormatError):
        parse_lattice(text)
