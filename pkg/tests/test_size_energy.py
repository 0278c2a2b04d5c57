import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplex_lab.errors import ContractError, SizeGuardError
from simplex_lab.tools.dyadic_geometry import ShiftedDyadicInterval as SDI
from simplex_lab.tools.grid_core import GridFunction
from simplex_lab.tools.size_energy import (
    CoeffSequence,
    bessel_sum,
    delicate_decay_probe,
    dual_coefficients,
    dual_normalization_ratio,
    dual_sequence,
    energy,
    energy_l2_check,
    random_sequence,
    separated_collections,
    separation_host,
    size,
    size_jn,
    stratify,
    tool_check,
    verify_energy,
    verify_stratification,
)
from simplex_lab.tools.tile_model import TileCollection, VectorTile, lacunary_family

FAMILY = lacunary_family([1, 3, 5])


def single(offsets=(0, 8)) -> TileCollection:
    # one vector tile on I = [0, 4)
    return TileCollection((VectorTile(SDI(2, 0), tuple(SDI(-2, c) for c in offsets)),))


class TestSize:
    def test_single_tile(self):
        result = size(single(), CoeffSequence([2.0], 0))
        assert result.value == pytest.approx(1.0)
        assert result.witness.top == 0
        assert result.witness.kind == 1
        assert result.witness.members == (0,)

    def test_zero_sequence(self):
        result = size(FAMILY, CoeffSequence.zeros(FAMILY, 0))
        assert result.value == 0
        assert result.witness is None

    def test_john_nirenberg_single_tile(self):
        assert size_jn(single(), CoeffSequence([2.0], 0)) == pytest.approx(1.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3), slot=st.integers(0, 2))
    def test_homogeneous(self, seed, scale, slot):
        seq = random_sequence(FAMILY, slot, seed)
        base = size(FAMILY, seq).value
        assert size(FAMILY, seq.scaled(scale)).value == pytest.approx(scale * base, rel=1e-9)
        assert size(FAMILY, seq.scaled(1j)).value == pytest.approx(base, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_monotone_under_restriction(self, seed):
        full = random_sequence(FAMILY, 0, seed)
        kept = np.random.default_rng(seed).random(len(FAMILY)) < 0.5
        sparse = CoeffSequence(np.where(kept, full.values, 0), 0)
        assert size(FAMILY, sparse).value <= size(FAMILY, full).value * (1 + 1e-12)
        assert size_jn(FAMILY, sparse) <= size_jn(FAMILY, full) * (1 + 1e-12) + 1e-15

    def test_checks(self):
        with pytest.raises(ContractError, match="coefficients for a collection"):
            size(FAMILY, CoeffSequence([1.0, 2.0], 0))
        with pytest.raises(ContractError, match="out of range"):
            size(FAMILY, CoeffSequence.zeros(FAMILY, 3))
        with pytest.raises(ContractError, match="dimension >= 2"):
            size(single((0,)), CoeffSequence([1.0], 0))
        with pytest.raises(ContractError, match="Empty"):
            size(TileCollection(()), CoeffSequence([], 0))

    def test_size_guard(self):
        big = lacunary_family([1, 3, 5, 7, 9, 11], max_tiles=600)
        with pytest.raises(SizeGuardError):
            size(big, CoeffSequence.zeros(big, 0))

    def test_mapping_outside_collection(self):
        stranger = VectorTile(SDI(4, 9), (SDI(-4, 0), SDI(-4, 8), SDI(-4, 12)))
        with pytest.raises(ContractError, match="outside"):
            CoeffSequence.from_mapping(FAMILY, {stranger: 1.0}, 0)


class TestEnergy:
    def test_single_tile(self):
        result = energy(single(), CoeffSequence([2.0], 0))
        assert result.value == pytest.approx(2.0)
        assert result.level == 0
        assert result.levels == (-1, 1)
        assert result.interior
        assert result.certified

    def test_zero_sequence(self):
        result = energy(FAMILY, CoeffSequence.zeros(FAMILY, 1))
        assert result.value == 0
        assert result.level is None
        assert result.family == []

    @pytest.mark.parametrize("seed", range(6))
    def test_certificate(self, seed):
        seq = random_sequence(FAMILY, seed % 3, seed, density=0.7)
        result = energy(FAMILY, seq)
        assert result.value > 0
        assert verify_energy(FAMILY, seq, result) == []

    @pytest.mark.parametrize("seed", range(4))
    def test_doubling(self, seed):
        seq = random_sequence(FAMILY, 2, seed)
        assert energy(FAMILY, seq.scaled(2.0)).value == pytest.approx(
            2 * energy(FAMILY, seq).value, rel=1e-12
        )

    def test_tampered_certificate(self):
        seq = CoeffSequence([2.0], 0)
        result = energy(single(), seq)
        result.value *= 2
        assert "energy value does not match its family" in verify_energy(single(), seq, result)

    def test_serializable(self):
        result = energy(FAMILY, random_sequence(FAMILY, 0, 3))
        data = result.to_dict()
        assert data["level"] == result.level
        assert len(data["family"]) == len(result.family)

    def test_l2_ratio(self, noise):
        coll = lacunary_family([1, 3])
        assert energy_l2_check(coll, GridFunction.zeros(256, 64.0), 0) == 0.0
        ratio = energy_l2_check(coll, noise(256, 1, L=64.0), 0)
        assert 0 < ratio < math.inf


class TestDuals:
    def test_single_tile_dual(self):
        coll, seq = single(), CoeffSequence([2.0], 0)
        dual = dual_sequence(coll, seq, energy(coll, seq))
        assert dual.values[0] == pytest.approx(0.5)
        assert dual.normalization == pytest.approx(4.0)
        assert dual_normalization_ratio(coll, dual) == pytest.approx(0.25)

    def test_vanishing_sequence(self):
        seq = CoeffSequence.zeros(FAMILY, 0)
        with pytest.raises(ContractError, match="vanishing"):
            dual_sequence(FAMILY, seq, energy(FAMILY, seq))

    def test_raw_sequences_have_no_normalization(self):
        with pytest.raises(ContractError, match="normalization"):
            dual_normalization_ratio(single(), CoeffSequence([1.0], 0))

    def test_bessel_sum_of_one_packet(self):
        c = CoeffSequence([0.5], 0, 4.0)
        assert bessel_sum(single(), single(), c, c, 64, 32.0) == pytest.approx(0.25)

    def test_bessel_sum_of_nothing(self):
        c = CoeffSequence([0.5], 0, 4.0)
        zero = CoeffSequence([0.0], 0, 4.0)
        assert bessel_sum(single(), single(), c, zero, 64, 32.0) == 0

    def test_bessel_sum_rejects_large_coefficients(self):
        c = CoeffSequence([0.5], 0, 4.0)
        with pytest.raises(ContractError, match="normalization"):
            bessel_sum(single(), single(), c, CoeffSequence([10.0], 0, 4.0), 64, 32.0)

    def test_separated_collections(self):
        pair = separated_collections(1, 4, 128.0)
        assert [p.time.k for p in pair.coll_p.tiles] == [34, 29]
        assert [q.time.k for q in pair.coll_q.tiles] == [48, 15, 112, 79]
        assert pair.distance_ratios("p") == [2.0, 2.0]
        assert pair.distance_ratios("q") == [16.0] * 4
        assert set(pair.anchors_p) < set(pair.anchors_q)

    def test_separated_collections_across_scales(self):
        pair = separated_collections(1, 4, 256.0, scales=(0, 1))
        assert len(pair.coll_p.tiles) == 4
        assert len(pair.coll_q.tiles) == 8
        assert {p.time.j for p in pair.coll_p.tiles} == {0, 1}
        assert pair.distance_ratios("p") == [2.0] * 4
        assert pair.distance_ratios("q") == [16.0] * 8

    def test_separated_collections_stay_in_the_host(self):
        with pytest.raises(ContractError, match="leaves"):
            separated_collections(1, 4, 64.0)
        with pytest.raises(ContractError, match="scale"):
            separated_collections(1, 4, 128.0, scales=())

    def test_separation_host(self):
        assert separation_host(6, [0]) == (4096, 512.0)
        assert separation_host(6, [0, 1]) == (8192, 1024.0)

    @pytest.mark.parametrize("scales", [(0,), (0, 1, 2)])
    def test_dual_coefficients_are_admissible(self, scales):
        pair = separated_collections(1, 5, 1024.0, scales=scales)
        phases = np.random.default_rng(4).random(len(pair.coll_q))
        coeffs = dual_coefficients(pair.coll_q, phases, 1.0)
        assert coeffs.normalization == sum(float(q.time.length) for q in pair.coll_q.tiles)
        assert dual_normalization_ratio(pair.coll_q, coeffs) == pytest.approx(1.0)

    def test_decay_probe(self):
        result = delicate_decay_probe(k1=1, k2_values=[4, 5, 6], trials=2, seed=1)
        assert [row["k2"] for row in result.rows] == [4, 5, 6]
        assert result.slope < -3
        assert result.metadata == {"N": 4096, "L": 512.0, "scales": [0]}

    def test_decay_across_scales(self):
        result = delicate_decay_probe(k1=1, k2_values=[4, 5, 6], trials=1, seed=2, scales=(0, 1))
        assert result.slope < -1
        assert result.metadata["scales"] == [0, 1]

    def test_decay_probe_arguments(self):
        with pytest.raises(ContractError, match="k1"):
            delicate_decay_probe(k1=3, k2_values=[2, 3])
        with pytest.raises(ContractError, match="normalization"):
            delicate_decay_probe(amplitude=2.0)


class TestToolCheck:
    def test_single_tile_equality(self):
        coll = single((0, 8, 12))
        seqs = [CoeffSequence([2.0], j) for j in range(3)]
        check = tool_check(coll, seqs, [0.5, 0.5, 0.0])
        assert check.lhs == pytest.approx(4.0)
        assert check.sizes == pytest.approx([1.0, 1.0, 1.0])
        assert check.energies == pytest.approx([2.0, 2.0, 2.0])
        assert check.ratio == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_sequences(self, seed):
        seqs = [random_sequence(FAMILY, j, 10 * seed + j) for j in range(3)]
        check = tool_check(FAMILY, seqs, [1 / 3, 1 / 3, 1 / 3])
        assert check.rhs > 0
        assert math.isfinite(check.ratio)
        assert set(check.to_dict()) == {"lhs", "rhs", "ratio", "sizes", "energies"}

    @pytest.mark.parametrize(
        ("thetas", "message"),
        [([0.5, 0.5, 0.5], "sum"), ([1.0, 0.0, 0.0], "outside"), ([0.5, 0.5], "exponents")],
    )
    def test_exponents(self, thetas, message):
        seqs = [random_sequence(FAMILY, j, j) for j in range(3)]
        with pytest.raises(ContractError, match=message):
            tool_check(FAMILY, seqs, thetas)

    def test_slots(self):
        seqs = [random_sequence(FAMILY, 0, j) for j in range(3)]
        with pytest.raises(ContractError, match="attached"):
            tool_check(FAMILY, seqs, [1 / 3] * 3)

    def test_needs_three_sequences(self):
        coll = single()
        with pytest.raises(ContractError, match="d >= 3"):
            tool_check(coll, [CoeffSequence([1.0], 0), CoeffSequence([1.0], 1)], [0.0, 0.0])


class TestStratify:
    def test_single_tile(self):
        coll, seq = single(), CoeffSequence([2.0], 0)
        strat = stratify(coll, seq)
        assert [s.level for s in strat.strata] == [1]
        assert strat.c_strat == pytest.approx(1.0)
        assert strat.residual == ()
        assert verify_stratification(coll, seq, strat) == []

    def test_zero_sequence(self):
        strat = stratify(FAMILY, CoeffSequence.zeros(FAMILY, 0))
        assert strat.residual == tuple(range(len(FAMILY)))
        assert strat.energy == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_random_sequences(self, seed):
        seq = random_sequence(FAMILY, seed % 3, seed, density=0.8)
        strat = stratify(FAMILY, seq)
        assert verify_stratification(FAMILY, seq, strat) == []
        assert set(strat.residual) == set(np.flatnonzero(seq.values == 0).tolist())
        levels = [s.level for s in strat.strata]
        assert levels == sorted(levels)

    def test_tampered_partition(self):
        seq = random_sequence(FAMILY, 0, 1)
        strat = stratify(FAMILY, seq)
        strat.residual = (0,)
        problems = verify_stratification(FAMILY, seq, strat)
        assert "strata and residual do not partition the collection" in problems
