import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from simplex_lab.errors import ContractError, CoverageError, SizeGuardError
from simplex_lab.tools.dyadic_geometry import RegionParams
from simplex_lab.tools.simplex_trees import RootedTree, membership_from_gaps, star_tree
from simplex_lab.tools.symbol_factory import (
    Bump1D,
    BumpOnLinearForm,
    Product,
    SimplexIndicator,
    WeightedSum,
    evaluate,
    fixing_expand,
    halfplane_symbol,
    make_m_avec,
    make_m_G,
    measure_envelope,
    product_closure_check,
    sample_rows,
    sample_simplex,
    smoothstep,
    telescope,
)

FIRST_REGION = RootedTree.parse("((1 2) 3)")
THIRD_REGION = RootedTree.parse("(1 (2 3))")
SEPARATED = RegionParams(c_sep=64, c_comp=4)


def _unit_bumps():
    bumps = [Bump1D.adapted(0, 1, 0.8), Bump1D.adapted(0, 1, 0.8)]
    outer = Bump1D(center=1.0, radius=0.6, plateau=0.2)
    return bumps, outer


class TestBumps:
    def test_smoothstep_is_a_step(self):
        t = np.linspace(-0.5, 1.5, 201)
        s = smoothstep(t)
        assert np.all((s >= 0) & (s <= 1))
        assert_allclose(s[t <= 0], 0)
        assert_allclose(s[t >= 1], 1)
        inner = np.linspace(0, 1, 51)
        assert_allclose(smoothstep(inner) + smoothstep(1 - inner), 1, atol=1e-12)

    def test_adapted_support_and_plateau(self):
        bump = Bump1D.adapted(0, 1, 0.8, 0.7)
        x = np.linspace(-1, 2, 3001)
        values = bump(x)
        assert np.all(values[(x < 0.1) | (x > 0.9)] == 0)
        assert_allclose(values[(x >= 0.151) & (x <= 0.849)], 1)
        assert np.all((values >= 0) & (values <= 1))

    def test_plateau_must_be_inside(self):
        with pytest.raises(ContractError, match="plateau"):
            Bump1D(center=0, radius=1, plateau=1)

    def test_linear_form_must_be_a_block(self):
        with pytest.raises(ContractError, match="contiguous"):
            BumpOnLinearForm(Bump1D(0, 1), (1, 0, 1))

    def test_linear_form_evaluates_block_sum(self):
        bump = Bump1D(center=3.0, radius=1.0)
        node = BumpOnLinearForm(bump, (0, 1, 1))
        assert evaluate(node, [5.0, 1.0, 2.0])[0] == pytest.approx(1.0)
        assert evaluate(node, [0.0, 1.0, 4.0])[0] == 0.0

    def test_expression_nodes(self):
        chi = SimplexIndicator(2)
        twice = WeightedSum([(2.0, chi), (-1.0, Product([chi, chi]))])
        assert_allclose(evaluate(twice, [[0.0, 1.0], [1.0, 0.0]]), [1.0, 0.0])
        with pytest.raises(ContractError, match="arities"):
            Product([chi, SimplexIndicator(3)])

    def test_sample_rows(self):
        rows = sample_rows(SimplexIndicator(2), [[0.0, 1.0], [2.0, 1.0]])
        assert rows == [
            {"xi_1": 0.0, "xi_2": 1.0, "value": 1.0},
            {"xi_1": 2.0, "xi_2": 1.0, "value": 0.0},
        ]


class TestHalfPlane:
    def test_inside(self):
        assert evaluate(halfplane_symbol(1, 1), [0.0, 10.0])[0] == pytest.approx(1.0, abs=1e-6)

    def test_wrong_side_and_line_vanish(self):
        sigma = halfplane_symbol(1, 1)
        assert evaluate(sigma, [10.0, 0.0])[0] == 0.0
        assert evaluate(sigma, [5.0, 5.0])[0] == 0.0

    def test_partition_of_unity_on_samples(self):
        xi = sample_simplex(2, 500, seed=4)
        assert_allclose(evaluate(halfplane_symbol(1, 2), xi * [[1, 2]]), 1, atol=1e-9)

    def test_truncated_series_error_is_bounded_by_tail(self):
        sigma = halfplane_symbol(1, 1, trunc=8)
        value = evaluate(sigma, [0.0, 10.0])[0]
        pair = sigma.pairs[0]
        candidates = len(pair.offsets) * 9
        assert sigma.tail_bound > 0
        assert abs(value - 1) <= 2 * candidates * sigma.tail_bound + 1e-6
        assert evaluate(sigma, [10.0, 0.0])[0] == 0.0

    def test_negative_truncation(self):
        with pytest.raises(ContractError, match="non-negative"):
            halfplane_symbol(1, 1, trunc=-1)


class TestAvecSymbol:
    def test_equal_gaps(self):
        m = make_m_avec((1, 1, 1))
        assert evaluate(m, [0.0, 1.0, 2.0])[0] == pytest.approx(1.0, abs=1e-6)

    def test_incomparable_gaps(self):
        m = make_m_avec((1, 1, 1))
        assert evaluate(m, [0.0, 1e6, 1e6 + 1])[0] == pytest.approx(0.0, abs=1e-12)

    def test_one_on_the_comparable_region(self):
        rp = RegionParams()
        m = make_m_avec((1, 1, 1), rp)
        xi = sample_simplex(3, 2000, seed=8, log_span=4)
        inside = membership_from_gaps(star_tree(3), np.diff(xi, axis=1), rp)
        assert inside.any()
        assert_allclose(evaluate(m, xi[inside]), 1, atol=1e-6)

    def test_metadata(self):
        description = make_m_avec((1, 2, 3)).describe()
        assert description["kind"] == "m_avec"
        assert description["window"] >= 0
        assert description["derived_c_comp"] > RegionParams().c_comp
        json.dumps(description)


class TestTreeSymbol:
    def test_two_leaves(self):
        m = make_m_G(RootedTree.parse("(1 2)"))
        xi = sample_simplex(2, 300, seed=5)
        assert_allclose(evaluate(m, xi), 1, atol=1e-9)

    def test_first_region_tree(self):
        m = make_m_G(FIRST_REGION, SEPARATED)
        assert evaluate(m, [0.0, 0.01, 1.0])[0] == pytest.approx(1.0, abs=1e-6)
        assert evaluate(m, [0.0, 1.0, 1.01])[0] == pytest.approx(0.0, abs=1e-12)

    def test_size_guard(self):
        with pytest.raises(SizeGuardError, match="n <= 6"):
            make_m_G(star_tree(7))

    def test_support_envelope_has_same_type(self):
        m = make_m_G(FIRST_REGION, SEPARATED)
        xi = sample_simplex(3, 3000, seed=6)
        envelope = measure_envelope(m, FIRST_REGION, xi)
        assert envelope.support_points > 0
        # each vertex has a single cut, so comparability is trivial
        assert envelope.c_comp == pytest.approx(1.0)
        assert np.isfinite(envelope.c_sep)
        support = np.abs(evaluate(m, xi)) > 1e-12
        inside = membership_from_gaps(FIRST_REGION, np.diff(xi, axis=1), envelope)
        assert not np.any(support & ~inside)

    def test_metadata_is_json(self):
        description = make_m_G(FIRST_REGION, SEPARATED).describe()
        assert description["tree"] == "((1 2) 3)"
        json.dumps(description)


class TestFixingExpansion:
    def test_outer_constant_on_support(self):
        bumps = [Bump1D.adapted(0, 1, 0.8), Bump1D.adapted(2, 3, 0.8)]
        outer = Bump1D(center=3.0, radius=3.0, plateau=2.5)
        expansion = fixing_expand(bumps, outer, trunc=4)
        assert np.count_nonzero(expansion.coefficients) == 1
        assert expansion.residual(32) == pytest.approx(0.0, abs=1e-14)

    def test_two_factors(self):
        bumps, outer = _unit_bumps()
        assert fixing_expand(bumps, outer, trunc=24).residual(64) < 1e-4

    def test_coefficient_decay(self):
        bumps, outer = _unit_bumps()
        expansion = fixing_expand(bumps, outer, trunc=24)
        assert expansion.shell(24) < 2.0**-6 * expansion.shell(8)

    def test_residual_shrinks_with_order(self):
        bumps, outer = _unit_bumps()
        r8, r16, r32 = (fixing_expand(bumps, outer, t).residual(64) for t in (8, 16, 32))
        assert r16 <= 2 * r8
        assert r32 <= 2 * r16

    def test_as_symbol_matches(self):
        bumps, outer = _unit_bumps()
        expansion = fixing_expand(bumps, outer, trunc=3)
        points = np.array([[0.3, 0.6], [0.5, 0.5], [0.8, 0.15]])
        assert_allclose(evaluate(expansion.as_symbol(), points), expansion.evaluate(points))

    def test_alpha_below_beta(self):
        bumps = [Bump1D.adapted(0, 1, 0.95)]
        with pytest.raises(ContractError, match="below beta"):
            fixing_expand(bumps, Bump1D(0.5, 1.0), trunc=4)

    def test_needs_adapted_bumps(self):
        with pytest.raises(ContractError, match="adapted"):
            fixing_expand([Bump1D(0.5, 0.4)], Bump1D(0.5, 1.0), trunc=4)


class TestTelescope:
    def test_two_leaves(self):
        decomposition = telescope(2, coverage_samples=500)
        assert len(decomposition.summands) == 1
        xi = sample_simplex(2, 200, seed=2)
        assert_allclose(decomposition.total(xi), 1, atol=1e-9)

    def test_three_leaves(self):
        rp = RegionParams(c_sep=4, c_comp=4)
        decomposition = telescope(3, rp=rp, coverage_samples=5000, seed=1)
        xi = sample_simplex(3, 1000, seed=2)
        strict = RegionParams(c_sep=8, c_comp=2)
        gaps = np.diff(xi, axis=1)
        interior = np.zeros(len(xi), dtype=bool)
        for G in decomposition.trees:
            interior |= membership_from_gaps(G, gaps, strict)
        assert interior.sum() > 100
        assert_allclose(decomposition.total(xi[interior]), 1, atol=1e-6)
        assert decomposition.identity_defect(xi) < 1e-12

    def test_order_is_respected(self):
        rp = RegionParams(c_sep=4, c_comp=4)
        decomposition = telescope(3, [2, 0, 1], rp, coverage_samples=1000)
        assert decomposition.trees[0] == star_tree(3)

    def test_uncovered_constants_are_refused(self):
        with pytest.raises(CoverageError) as info:
            telescope(3, rp=RegionParams(c_sep=16, c_comp=2), coverage_samples=5000)
        assert info.value.exit_code == 3
        assert len(info.value.uncovered) > 0


class TestProductClosure:
    def test_square(self):
        report = product_closure_check(FIRST_REGION, FIRST_REGION, SEPARATED, samples=2000)
        assert report.candidate == str(FIRST_REGION)
        assert report.support_points > 0
        assert report.support_violations == 0

    def test_disjoint_region_types(self):
        rp = RegionParams(c_sep=256, c_comp=4)
        report = product_closure_check(FIRST_REGION, THIRD_REGION, rp, samples=2000, seed=3)
        assert report.candidate == "(1 2 3)"
        assert report.support_points == 0
        assert report.support_violations == 0

    def test_size_guard(self):
        with pytest.raises(SizeGuardError):
            product_closure_check(star_tree(6), star_tree(6))
