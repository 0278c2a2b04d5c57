"""Shared fixtures for the simplex_lab test-suite."""

import numpy as np
import pytest

from simplex_lab.tools.grid_core import GridFunction, RandomBandlimited, from_preset


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def band_limited():
    """Factory for reproducible random band-limited grid functions."""

    def make(band: int, seed: int, N: int = 256, L: float = 1.0) -> GridFunction:
        return from_preset(RandomBandlimited(band=band, seed=seed), N, L)

    return make


@pytest.fixture
def noise():
    """Factory for complex white-noise grid functions."""

    def make(N: int, seed: int, L: float = 1.0) -> GridFunction:
        generator = np.random.default_rng(seed)
        return GridFunction(generator.standard_normal(N) + 1j * generator.standard_normal(N), L)

    return make
