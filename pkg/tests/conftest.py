"""Shared fixtures for the engine and harness tests."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sft_engine.config import SftConfig, SolverSettings
from sft_engine.index_sets import FrequencySet, HyperbolicCross, hc_enumerate

settings.register_profile("default", max_examples=100, deadline=None)
settings.register_profile(
    "fast", max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_cross():
    return HyperbolicCross(3, 16)


@pytest.fixture
def random_subset(rng):
    """Draw `size` distinct frequencies from a materialized cross."""
    def draw(hc: HyperbolicCross, size: int) -> FrequencySet:
        everything = hc_enumerate(hc)
        picks = rng.choice(len(everything), size=size, replace=False)
        return everything.take(picks)
    return draw


@pytest.fixture
def make_config():
    def build(dimension=3, radius=16, sparsity=4, **overrides):
        overrides.setdefault("solver", SolverSettings(10, 1e-10))
        return SftConfig(
            dimension=dimension,
            search_space=HyperbolicCross(dimension, radius),
            sparsity=sparsity,
            **overrides,
        )
    return build
