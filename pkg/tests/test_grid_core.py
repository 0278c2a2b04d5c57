import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from simplex_lab.errors import AliasingError, ContractError, DomainError, GridError
from simplex_lab.tools.grid_core import (
    Chirp,
    GridFunction,
    Indicator,
    PureMode,
    RandomBandlimited,
    Spectrum,
    critical_chirp_period,
    dft,
    from_preset,
    idft,
    lp_quasinorm,
    truncate,
    window,
)


class TestPresets:
    def test_pure_mode_samples(self):
        f = from_preset(PureMode(k=3), 16, 1.0)
        m = np.arange(16)
        assert_allclose(f.samples, np.exp(2j * np.pi * 3 * m / 16), atol=1e-14)

    def test_indicator_is_left_closed(self):
        f = from_preset(Indicator(a=0, b=0.5), 8, 1.0)
        assert_allclose(f.samples.real, [1, 1, 1, 1, 0, 0, 0, 0])

    def test_dict_presets_are_validated(self):
        f = from_preset({"kind": "pure_mode", "k": 2}, 8)
        assert f.N == 8

    def test_chirp_has_flat_spectrum_at_critical_period(self):
        N = 1024
        f = from_preset(Chirp(sign=1), N, critical_chirp_period(N))
        magnitudes = np.abs(dft(f).coefficients)
        assert_allclose(magnitudes, 1 / math.sqrt(N), rtol=1e-9)

    def test_chirp_is_unimodular(self):
        f = from_preset(Chirp(sign=-1), 1024, 64.0)
        assert_allclose(np.abs(f.samples), 1.0, atol=1e-12)

    def test_random_bandlimited_is_reproducible(self):
        a = from_preset(RandomBandlimited(band=5, seed=7), 64)
        b = from_preset(RandomBandlimited(band=5, seed=7), 64)
        assert a.samples.tobytes() == b.samples.tobytes()

    def test_random_bandlimited_respects_band(self):
        f = from_preset(RandomBandlimited(band=5, seed=1), 64)
        spectrum = dft(f)
        outside = np.abs(spectrum.frequencies) > 5
        assert np.max(np.abs(spectrum.coefficients[outside])) < 1e-12

    def test_band_at_nyquist_is_rejected(self):
        with pytest.raises(AliasingError, match="below N/2"):
            from_preset(RandomBandlimited(band=32, seed=0), 64)

    def test_mode_outside_grid_is_rejected(self):
        with pytest.raises(AliasingError):
            from_preset(PureMode(k=8), 16)

    @pytest.mark.parametrize("N", [6, 12, 4, 100])
    def test_invalid_grid_size(self, N):
        with pytest.raises(GridError, match="power of two"):
            from_preset(PureMode(k=0), N)


class TestGridFunction:
    def test_non_finite_samples_rejected(self):
        samples = np.ones(8, dtype=complex)
        samples[3] = np.nan
        with pytest.raises(GridError, match="NaN"):
            GridFunction(samples)

    def test_samples_are_read_only(self):
        f = GridFunction.constant(1.0, 8)
        with pytest.raises(ValueError):
            f.samples[0] = 2

    def test_mismatched_grids(self):
        with pytest.raises(GridError, match="Grid mismatch"):
            GridFunction.zeros(8) + GridFunction.zeros(16)

    def test_inner_product_weight(self):
        f = GridFunction.constant(2.0, 16, period=4.0)
        assert f.inner(f) == pytest.approx(16.0)

    def test_binary_codec(self, noise):
        f = noise(32, seed=3, L=2.5)
        g = GridFunction.from_bytes(f.to_bytes())
        assert g.period == 2.5
        assert g.samples.tobytes() == f.samples.tobytes()

    def test_json_codec(self, noise):
        f = noise(16, seed=4)
        g = GridFunction.from_json(f.to_json())
        assert_allclose(g.samples, f.samples, rtol=0, atol=0)

    def test_truncated_payload(self, noise):
        payload = noise(16, seed=5).to_bytes()[:-16]
        with pytest.raises(GridError, match="expected"):
            GridFunction.from_bytes(payload)


class TestTransforms:
    def test_pure_mode_spectrum(self):
        spectrum = dft(from_preset(PureMode(k=3), 16))
        expected = np.zeros(16)
        expected[3 + 8] = 1
        assert_allclose(spectrum.coefficients, expected, atol=1e-14)
        assert spectrum.coefficient(3) == pytest.approx(1)

    def test_nyquist_bin_is_negative(self):
        assert dft(GridFunction.zeros(8)).frequencies[0] == -4

    def test_boxcar_against_direct_sum(self):
        f = from_preset(Indicator(a=0, b=0.5), 8)
        k = np.arange(-4, 4)
        m = np.arange(8)
        direct = (f.samples[None, :] * np.exp(-2j * np.pi * np.outer(k, m) / 8)).sum(axis=1) / 8
        assert_allclose(dft(f).coefficients, direct, atol=1e-14)

    def test_round_trip(self, noise):
        f = noise(256, seed=11, L=3.0)
        g = idft(dft(f))
        assert g.period == 3.0
        assert_allclose(g.samples, f.samples, rtol=1e-12, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), L=st.floats(0.1, 50))
    def test_parseval(self, seed, L):
        f = from_preset(RandomBandlimited(band=12, seed=seed), 128, L)
        left = np.sum(np.abs(f.samples) ** 2) * L / f.N
        right = L * np.sum(np.abs(dft(f).coefficients) ** 2)
        assert left == pytest.approx(right, rel=1e-10)

    def test_spectrum_needs_grid_size(self):
        with pytest.raises(GridError):
            Spectrum(np.zeros(10))


class TestQuasinorms:
    @pytest.mark.parametrize("p", [0.5, 2 / 3, 1, 2, math.inf])
    def test_constant_one(self, p):
        assert lp_quasinorm(GridFunction.constant(1.0, 32), p) == pytest.approx(1.0)

    def test_two_point_array(self):
        assert lp_quasinorm(np.array([1.0, 1.0]), 2 / 3) == pytest.approx(1.0)

    @pytest.mark.parametrize("p", [0, -1.0])
    def test_nonpositive_exponent(self, p):
        with pytest.raises(DomainError, match="positive"):
            lp_quasinorm(GridFunction.zeros(8), p)

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        scale=st.floats(-100, 100).filter(lambda s: abs(s) > 1e-3),
        p=st.sampled_from([0.5, 2 / 3, 1.0, 2.0, math.inf]),
    )
    def test_homogeneity(self, seed, scale, p):
        f = from_preset(RandomBandlimited(band=6, seed=seed), 64)
        assert lp_quasinorm(f * scale, p) == pytest.approx(abs(scale) * lp_quasinorm(f, p))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), p=st.sampled_from([0.5, 2 / 3, 1.0, 2.0, math.inf]))
    def test_monotone_in_modulus(self, seed, p):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        f = g * rng.uniform(0, 1, 64)
        assert lp_quasinorm(f, p) <= lp_quasinorm(g, p) * (1 + 1e-12)


class TestTruncation:
    def test_half_period(self):
        f = truncate(GridFunction.constant(1.0, 8), 0, 0.5)
        assert_allclose(f.samples.real, [1, 1, 1, 1, 0, 0, 0, 0])

    def test_full_window_is_identity(self, noise):
        f = noise(16, seed=2)
        assert truncate(f, 0, 1.0) is f

    def test_wraps_around_the_period(self):
        f = truncate(GridFunction.constant(1.0, 8), 0.75, 1.25)
        assert_allclose(f.samples.real, [1, 1, 0, 0, 0, 0, 1, 1])

    def test_empty_interval(self):
        with pytest.raises(ContractError, match="Empty"):
            truncate(GridFunction.zeros(8), 0.5, 0.5)

    def test_chirp_window_norm(self):
        f = from_preset(Chirp(sign=1), 1024, 64.0)
        assert lp_quasinorm(window(f, 16.0), 2) == pytest.approx(4.0, rel=1e-10)
