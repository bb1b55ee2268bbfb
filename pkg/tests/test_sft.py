import math
import time
from decimal import Decimal, localcontext

import numpy as np
import pytest

from sft_engine.config import Strategy
from sft_engine.errors import DimensionMismatchError, PipelineTimeout, StageError
from sft_engine.index_sets import FrequencySet, HyperbolicCross
from sft_engine.lattice import axis_lattice, build_reconstructing, lattice_nodes, min_subsample_count
from sft_engine.sampling import make_design
from sft_engine.sft import (
    Deadline,
    SampledFunction,
    SparseTrigPolynomial,
    derive_rng,
    detect_1d,
    detect_incremental,
    least_squares_error_bound,
    min_detection_iterations,
    random_sparse_polynomial,
    select_frequencies,
    sft_pipeline,
    threshold_bound,
)
from sft_engine.transform import CoefficientVector


def polynomial(pairs, dimension):
    freqs = FrequencySet([k for k, _ in pairs], dimension=dimension)
    lookup = dict(pairs)
    return SparseTrigPolynomial(CoefficientVector(freqs, [lookup[k] for k in freqs]))


# ============================================================================
# Parameter bounds
# ============================================================================

@pytest.mark.parametrize("args,expected", [
    ((1, 0.0, 0.5, math.exp(-1)), 4),
    ((4, 0.0, 1.0, math.exp(-1)), math.ceil(16 * (math.log(4) + 1))),
    ((4, 2.0, 1.0, 0.1), math.ceil(32 * (math.log(4) + math.log(10)))),
])
def test_min_detection_iterations(args, expected):
    assert min_detection_iterations(*args) == expected


@pytest.mark.parametrize("args", [(0, 0.0, 1.0, 0.1), (4, 0.0, 0.0, 0.1), (4, 0.0, 1.0, 1.0), (4, -1.0, 1.0, 0.1)])
def test_min_detection_iterations_rejects_invalid_input(args):
    with pytest.raises(ValueError):
        min_detection_iterations(*args)


def test_threshold_bound():
    assert threshold_bound(1.0, 0.0, 0.0) == pytest.approx(1 / math.sqrt(2))
    assert threshold_bound(1.0, 0.1, 0.05) == pytest.approx(1 / math.sqrt(2) - 0.5)
    assert threshold_bound(0.1, 1.0, 0.0) < 0


def test_least_squares_error_bound():
    bound = least_squares_error_bound(0.1, 0.0, 0.0, 4, 0)
    assert bound.tight == pytest.approx(0.09)
    assert bound.loose == pytest.approx(0.09)
    bound = least_squares_error_bound(0.1, 1.0, 0.5, 4, 8)
    assert bound.tight == pytest.approx((0.3 + math.sqrt(2 / 36)) ** 2 + 1.0)
    assert bound.loose == pytest.approx((3 + math.sqrt(16 / 36)) ** 2 * 0.01 + 1.0)


def test_bounds_match_high_precision_evaluation():
    rng = np.random.default_rng(21)
    with localcontext() as ctx:
        ctx.prec = 50
        for _ in range(20):
            count = int(rng.integers(1, 10_000))
            excess = int(rng.integers(0, 10_000))
            delta, eps = float(rng.uniform(0.01, 1.0)), float(rng.uniform(0.001, 0.999))
            tail, e2, e_in, e_out = (float(v) for v in rng.uniform(0.0, 0.1, size=4))
            D = Decimal

            value = 4 * (count + D(tail) ** 2 / D(delta) ** 2) * (D(count).ln() - D(eps).ln())
            assert min_detection_iterations(count, tail, delta, eps) == max(1, math.ceil(value))

            threshold = D(delta) / D(2).sqrt() - 4 * D(e2) - 2 * D(e_in)
            assert threshold_bound(delta, e2, e_in) == pytest.approx(float(threshold), rel=1e-14, abs=1e-15)

            bound = least_squares_error_bound(e2, e_in, e_out, count, excess)
            tight = (3 * D(e2) + (D(2) / (9 * count)).sqrt() * D(e_in)) ** 2 + 4 * D(e_out) ** 2
            loose = (3 + (D(2 * excess) / (9 * count)).sqrt()) ** 2 * D(e2) ** 2 + 4 * D(e_out) ** 2
            assert bound.tight == pytest.approx(float(tight), rel=1e-14, abs=1e-300)
            assert bound.loose == pytest.approx(float(loose), rel=1e-14, abs=1e-300)


# ============================================================================
# Seeds, deadlines, sampled functions
# ============================================================================

def test_derive_rng_is_deterministic_per_key():
    a = derive_rng(7, 1, 2).random(5)
    np.testing.assert_array_equal(a, derive_rng(7, 1, 2).random(5))
    assert not np.array_equal(a, derive_rng(7, 1, 3).random(5))
    assert not np.array_equal(a, derive_rng(8, 1, 2).random(5))


def test_deadline():
    assert Deadline().remaining == math.inf
    Deadline().check()
    with pytest.raises(PipelineTimeout, match="sampling"):
        Deadline(0).check("sampling")


def test_sampled_function_counts_every_point():
    f = SampledFunction(lambda p: p[:, 0].astype(complex), dimension=2, chunk_size=3)
    values = f(np.tile([[0.25, 0.5]], (10, 1)))
    assert f.count == 10
    np.testing.assert_allclose(values, 0.25)
    f(np.zeros((4, 2)))
    assert f.count == 14
    f.reset()
    assert f.count == 0
    with pytest.raises(DimensionMismatchError):
        f(np.zeros((2, 3)))


def test_random_sparse_polynomial(rng):
    hc = HyperbolicCross(4, 16)
    truth = random_sparse_polynomial(hc, 8, rng)
    assert len(truth.coefficients) == 8
    assert all(hc.contains(k) for k in truth.coefficients.support)
    np.testing.assert_allclose(np.abs(truth.coefficients.values), 1.0)
    assert truth.relative_l2_error(truth.coefficients) == 0.0
    assert truth.relative_l2_error(CoefficientVector.empty(4)) == 1.0


def test_select_frequencies_orders_by_score_then_canonically():
    candidates = FrequencySet([(0,), (1,), (2,), (3,)])
    scores = np.array([0.5, 2.0, 2.0, 0.0])
    assert select_frequencies(candidates, scores, 0.1, 2) == FrequencySet([(1,), (2,)])
    assert select_frequencies(candidates, scores, 0.1, 10) == FrequencySet([(0,), (1,), (2,)])
    assert len(select_frequencies(candidates, scores, 5.0, 10)) == 0


# ============================================================================
# Stages
# ============================================================================

def test_detect_1d_single_frequency(make_config):
    f = polynomial([((3, -2, 1), 1.0)], 3).sampled()
    result = detect_1d(f, 0, make_config())
    assert result.detected == FrequencySet([(3,)])
    assert result.samples_used == f.count == result.anchors * result.nodes
    assert result.detected_scores[0] == pytest.approx(1.0, abs=1e-12)


def test_detect_1d_zero_frequency_on_unused_axis(make_config):
    f = polynomial([((0, 5, 0), 2.0)], 3).sampled()
    assert detect_1d(f, 0, make_config()).detected == FrequencySet([(0,)])


def test_detect_1d_zero_function_detects_nothing(make_config):
    f = SampledFunction(lambda p: np.zeros(len(p), dtype=complex), 3)
    assert len(detect_1d(f, 1, make_config()).detected) == 0


def test_detect_1d_rejects_invalid_axis(make_config):
    f = polynomial([((1, 1, 1), 1.0)], 3).sampled()
    with pytest.raises(StageError) as info:
        detect_1d(f, 3, make_config())
    assert info.value.axes == (3,)


def test_detect_incremental_empty_product_takes_no_samples(make_config):
    f = polynomial([((1, 1, 1), 1.0)], 3).sampled()
    result = detect_incremental(f, FrequencySet([(16,)]), FrequencySet([(16,)]), make_config())
    assert len(result.candidates) == 0 and len(result.detected) == 0
    assert result.samples_used == 0 and f.count == 0
    assert result.stage == 3


def test_stage_evaluates_one_anchor_block_at_a_time(make_config):
    truth = polynomial([((3, -2, 1), 1.0)], 3)
    blocks = []

    def recording(points):
        blocks.append(points.copy())
        return truth(points)

    f = SampledFunction(recording, 3)
    result = detect_1d(f, 0, make_config(chunk_size=16))
    assert all(len(block) <= 16 for block in blocks)
    assert all(len(np.unique(block[:, 1:], axis=0)) == 1 for block in blocks)
    assert sum(len(block) for block in blocks) == f.count == result.samples_used == result.anchors * 64
    assert result.detected == FrequencySet([(3,)])


# ============================================================================
# Sampling designs
# ============================================================================

def test_random_and_subsampled_designs_take_the_same_node_count(random_subset):
    freqs = random_subset(HyperbolicCross(2, 16), 40)
    lat = build_reconstructing(freqs, seed=1)
    tail = 0.5
    bound = min_subsample_count(len(freqs), tail)
    assert bound < lat.size
    random = make_design(freqs, Strategy.UNIFORM_RANDOM, tail, np.random.default_rng(0), lattice=lat)
    sub = make_design(freqs, Strategy.SUBSAMPLED_LATTICE, tail, np.random.default_rng(0), lattice=lat)
    assert random.n == sub.n == bound
    assert random.strategy is Strategy.UNIFORM_RANDOM and sub.strategy is Strategy.SUBSAMPLED_LATTICE
    assert np.all((random.points >= 0) & (random.points < 1))
    np.testing.assert_array_equal(sub.nodes(0, sub.n), lattice_nodes(lat, sub.sampling.picks))


def test_sampled_strategies_fall_back_to_the_full_lattice_together(random_subset):
    freqs = random_subset(HyperbolicCross(2, 16), 12)
    lat = build_reconstructing(freqs, seed=1)
    assert min_subsample_count(len(freqs), math.log(40)) >= lat.size
    for strategy in (Strategy.UNIFORM_RANDOM, Strategy.SUBSAMPLED_LATTICE):
        design = make_design(freqs, strategy, math.log(40), np.random.default_rng(0), lattice=lat)
        assert design.strategy is Strategy.FULL_LATTICE
        assert design.n == lat.size
        starts = [start for start, _ in design.blocks(100)]
        assert starts == list(range(0, lat.size, 100))


def test_random_axis_stage_is_capped_by_the_axis_lattice(make_config):
    f = polynomial([((3, -2, 1), 1.0)], 3).sampled()
    result = detect_1d(f, 0, make_config(strategy=Strategy.UNIFORM_RANDOM))
    assert result.nodes == axis_lattice(16).size
    assert f.count == result.samples_used == result.anchors * result.nodes
    assert result.detected == FrequencySet([(3,)])


# ============================================================================
# Pipeline
# ============================================================================

def test_pipeline_one_dimensional(make_config):
    truth = polynomial([((-5,), 1.0 + 1.0j), ((2,), 0.5)], 1)
    f = truth.sampled()
    result = sft_pipeline(f, make_config(dimension=1, sparsity=2))
    assert result.frequencies == truth.coefficients.support
    assert truth.relative_l2_error(result.coefficients) <= 1e-10
    assert len(result.stages) == 1


@pytest.mark.parametrize("strategy", list(Strategy))
def test_pipeline_recovers_sparse_polynomial(make_config, strategy):
    truth = random_sparse_polynomial(HyperbolicCross(3, 16), 4, np.random.default_rng(12))
    f = truth.sampled()
    config = make_config(strategy=strategy, threshold=1e-3, seed=5)
    result = sft_pipeline(f, config)
    assert result.frequencies == truth.coefficients.support
    assert truth.relative_l2_error(result.coefficients) <= 1e-4
    assert result.samples_total == f.count == sum(stage.samples_used for stage in result.stages)
    assert [stage.kind for stage in result.stages] == ["axis"] * 3 + ["incremental"] * 2
    assert result.empty_stage is None
    assert result.failure_bound == pytest.approx(6 * 3 * config.eps)


def test_pipeline_is_reproducible(make_config):
    truth = random_sparse_polynomial(HyperbolicCross(3, 16), 4, np.random.default_rng(2))
    config = make_config(seed=9)
    first = sft_pipeline(truth.sampled(), config)
    second = sft_pipeline(truth.sampled(), config)
    assert first.frequencies == second.frequencies
    np.testing.assert_array_equal(first.coefficients.values, second.coefficients.values)
    assert first.samples_total == second.samples_total


def test_pipeline_with_refit_appends_a_stage(make_config):
    truth = random_sparse_polynomial(HyperbolicCross(3, 16), 3, np.random.default_rng(4))
    result = sft_pipeline(truth.sampled(), make_config(sparsity=3, strategy=Strategy.FULL_LATTICE, refit=True))
    assert result.stages[-1].kind == "refit"
    assert result.frequencies == truth.coefficients.support
    assert truth.relative_l2_error(result.coefficients) <= 1e-10


def test_pipeline_zero_function_stops_at_first_stage(make_config):
    f = SampledFunction(lambda p: np.zeros(len(p), dtype=complex), 3)
    result = sft_pipeline(f, make_config())
    assert result.empty_stage == 0
    assert len(result.frequencies) == 0 and len(result.coefficients) == 0
    assert result.samples_total == f.count


def test_pipeline_checks_dimension(make_config):
    f = polynomial([((1, 1), 1.0)], 2).sampled()
    with pytest.raises(DimensionMismatchError):
        sft_pipeline(f, make_config(dimension=3))


def test_pipeline_honours_time_limit(make_config):
    f = polynomial([((1, 1, 1), 1.0)], 3).sampled()
    with pytest.raises(PipelineTimeout):
        sft_pipeline(f, make_config(), time_limit_s=0)


def test_timeout_reports_the_samples_of_finished_stages(make_config):
    truth = polynomial([((1, 1, 1), 1.0)], 3)
    calls = []

    def stalls_in_first_incremental_stage(points):
        calls.append(len(points))
        # three axis stages of five anchors come first
        if len(calls) == 16:
            time.sleep(1.0)
        return truth(points)

    f = SampledFunction(stalls_in_first_incremental_stage, 3)
    with pytest.raises(PipelineTimeout) as info:
        sft_pipeline(f, make_config(), time_limit_s=0.5)
    stage_samples = info.value.stage_samples
    assert stage_samples[:3] == [5 * 64] * 3
    assert len(stage_samples) == 4 and stage_samples[3] == calls[15]
    assert sum(stage_samples) == f.count


def test_random_strategy_samples_like_the_subsampled_one(make_config):
    truth = random_sparse_polynomial(HyperbolicCross(3, 16), 4, np.random.default_rng(12))
    runs = {
        strategy: sft_pipeline(truth.sampled(), make_config(strategy=strategy, threshold=1e-3, seed=5))
        for strategy in (Strategy.UNIFORM_RANDOM, Strategy.SUBSAMPLED_LATTICE)
    }
    random, sub = runs[Strategy.UNIFORM_RANDOM], runs[Strategy.SUBSAMPLED_LATTICE]
    assert [stage.nodes for stage in random.stages] == [stage.nodes for stage in sub.stages]
    assert random.samples_total == sub.samples_total


@pytest.mark.slow
def test_pipeline_detection_rate_on_random_instances(make_config):
    hc = HyperbolicCross(4, 16)
    hits = 0
    for rep in range(10):
        truth = random_sparse_polynomial(hc, 8, np.random.default_rng(100 + rep))
        result = sft_pipeline(truth.sampled(), make_config(dimension=4, sparsity=8, seed=rep))
        hits += result.frequencies == truth.coefficients.support
    assert hits >= 9


@pytest.mark.slow
def test_pipeline_exact_recovery_rate_in_six_dimensions(make_config):
    hc = HyperbolicCross(6, 32)
    hits = 0
    for rep in range(10):
        truth = random_sparse_polynomial(hc, 32, np.random.default_rng(600 + rep))
        config = make_config(dimension=6, radius=32, sparsity=32, threshold=0.1, seed=rep)
        result = sft_pipeline(truth.sampled(), config)
        if result.frequencies == truth.coefficients.support:
            hits += 1
            assert truth.relative_l2_error(result.coefficients) <= 1e-4
    assert hits >= 9


@pytest.mark.slow
def test_strategies_detect_the_same_support(make_config):
    hc = HyperbolicCross(4, 16)
    agree = 0
    for rep in range(10):
        truth = random_sparse_polynomial(hc, 8, np.random.default_rng(200 + rep))
        supports = [
            sft_pipeline(
                truth.sampled(),
                make_config(dimension=4, sparsity=8, strategy=strategy, threshold=1e-3, seed=rep),
            ).frequencies
            for strategy in Strategy
        ]
        agree += all(support == truth.coefficients.support for support in supports)
    assert agree >= 9


@pytest.mark.slow
def test_full_lattice_detects_every_large_coefficient(make_config):
    hc = HyperbolicCross(4, 16)
    delta = 1.0
    sound = 0
    for rep in range(10):
        truth = random_sparse_polynomial(hc, 8, np.random.default_rng(300 + rep), unit_magnitude=False)
        config = make_config(
            dimension=4, sparsity=8, strategy=Strategy.FULL_LATTICE, threshold=delta / math.sqrt(2), seed=rep
        )
        found = sft_pipeline(truth.sampled(), config).frequencies
        large = truth.coefficients.support.take(np.flatnonzero(np.abs(truth.coefficients.values) >= delta))
        sound += bool(np.all(found.index_of(large.array) >= 0))
    assert sound >= 9
