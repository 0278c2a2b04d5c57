from functools import cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplex_lab.errors import ContractError, SizeGuardError
from simplex_lab.experiments import schroeder_numbers
from simplex_lab.tools.dyadic_geometry import RegionParams
from simplex_lab.tools.simplex_trees import (
    RootedTree,
    check_retract,
    coverage_report,
    enumerate_trees,
    index_interval,
    membership_from_gaps,
    merge_candidate,
    region_membership,
    retract_pair,
    shares_cut,
    star_tree,
)

# root sons {1,2,3}, {4}, {5,6}; the first splits as {1}, {2,3}
FIGURE_TREE = "((1 (2 3)) 4 (5 6))"


def _count_trees(n: int) -> int:
    """Independent count: a tree over m > 1 leaves is a sequence of >= 2 subtrees."""

    @cache
    def trees(m: int) -> int:
        return 1 if m == 1 else forests(m, 2)

    @cache
    def forests(m: int, k: int) -> int:
        # ordered sequences of at least k trees over m leaves
        if m == 0:
            return 1 if k == 0 else 0
        rest = max(k - 1, 0)
        return sum(trees(s) * forests(m - s, rest) for s in range(1, m - rest + 1))

    return trees(n)


class TestParsing:
    def test_round_trip_string(self):
        G = RootedTree.parse(FIGURE_TREE)
        assert str(G) == FIGURE_TREE
        assert RootedTree.from_json(G.to_json()) == G

    def test_nested_lists(self):
        assert RootedTree.from_nested([[1, 2], 3]) == RootedTree.parse("((1 2) 3)")

    @pytest.mark.parametrize("text", ["((1 2) 3", "(1 2))", "(1)", "(2 1)", "(1 x)"])
    def test_malformed(self, text):
        with pytest.raises(ContractError):
            RootedTree.parse(text)

    def test_single_leaf(self):
        G = RootedTree.from_nested(1)
        assert G.n == 1
        assert G.internal_vertices == ()


class TestEnumeration:
    @pytest.mark.parametrize(("n", "count"), [(1, 1), (2, 1), (3, 3), (4, 11)])
    def test_small_counts(self, n, count):
        assert len(enumerate_trees(n)) == count

    @pytest.mark.parametrize("n", range(1, 7))
    def test_counts_match_recursive_oracle(self, n):
        assert len(enumerate_trees(n)) == _count_trees(n)
        assert len(enumerate_trees(n)) == schroeder_numbers(n)[n - 1]

    def test_duplicate_free_and_ordered(self):
        trees = enumerate_trees(5)
        assert len({str(G) for G in trees}) == len(trees)
        keys = [G.degree_sequence for G in trees]
        assert keys == sorted(keys)

    def test_n3_order(self):
        assert [str(G) for G in enumerate_trees(3)] == ["(1 (2 3))", "((1 2) 3)", "(1 2 3)"]

    def test_size_guard(self):
        with pytest.raises(SizeGuardError, match="n <= 8"):
            enumerate_trees(9)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_structure(self, n):
        for G in enumerate_trees(n):
            assert G.root.level == 0
            assert index_interval(G, G.root) == (1, n)
            for u in G.nodes:
                if u.parent is not None:
                    assert u.level == G.nodes[u.parent].level + 1
            for u in G.internal_vertices:
                sons = G.sons(u)
                assert len(sons) >= 2
                assert (u.lo, u.hi) == (sons[0].lo, sons[-1].hi)
                labels = [i for s in sons for i in range(s.lo, s.hi + 1)]
                assert labels == list(range(u.lo, u.hi + 1))


class TestIndexInterval:
    def test_leaf(self):
        G = RootedTree.parse("((1 2) 3)")
        leaf = next(u for u in G.nodes if u.label == 3)
        assert index_interval(G, leaf) == (3, 3)

    def test_inner_vertex(self):
        G = RootedTree.parse("((1 2) 3)")
        assert index_interval(G, 1) == (1, 2)

    def test_foreign_vertex(self):
        G = RootedTree.parse("((1 2) 3)")
        other = RootedTree.parse("(1 (2 (3 4)))")
        with pytest.raises(ContractError):
            index_interval(G, other.nodes[5])
        with pytest.raises(ContractError):
            index_interval(G, 17)


class TestRegionMembership:
    def test_two_leaves_cover_everything(self):
        G = enumerate_trees(2)[0]
        assert region_membership(G, [0.0, 1e-9], RegionParams())
        assert region_membership(G, [-5.0, 1e6], RegionParams())

    def test_figure_tree(self):
        G = RootedTree.parse(FIGURE_TREE)
        rp = RegionParams(c_sep=4, c_comp=2)
        xi = np.concatenate([[0.0], np.cumsum([8, 1, 64, 64, 1])])
        assert region_membership(G, xi, rp)

    def test_figure_tree_violated(self):
        G = RootedTree.parse(FIGURE_TREE)
        rp = RegionParams(c_sep=4, c_comp=2)
        xi = np.concatenate([[0.0], np.cumsum([1, 8, 64, 64, 1])])
        assert not region_membership(G, xi, rp)

    def test_non_increasing(self):
        with pytest.raises(ContractError, match="strictly increasing"):
            region_membership(star_tree(3), [0.0, 1.0, 1.0], RegionParams())

    def test_wrong_length(self):
        with pytest.raises(ContractError):
            region_membership(star_tree(3), [0.0, 1.0], RegionParams())

    @settings(max_examples=100, deadline=None)
    @given(
        log_gaps=st.lists(st.floats(-6, 6), min_size=3, max_size=3),
        exponent=st.integers(-10, 10),
    )
    def test_scale_invariance(self, log_gaps, exponent):
        # powers of two keep the dilated gap ratios exact
        scale = 2.0**exponent
        xi = np.concatenate([[0.0], np.cumsum(2.0 ** np.array(log_gaps))])
        rp = RegionParams()
        for G in enumerate_trees(4):
            moved = region_membership(G, scale * xi, rp)
            assert moved == bool(membership_from_gaps(G, np.diff(scale * xi), rp))
            assert moved == region_membership(G, xi, rp)


class TestCuts:
    def test_same_tree(self):
        G = RootedTree.parse("((1 2) (3 4))")
        assert shares_cut(G, G) == 2

    def test_disjoint_cuts(self):
        assert shares_cut(RootedTree.parse("(1 (2 3))"), RootedTree.parse("((1 2) 3)")) is None

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_star_shares_smallest_cut(self, n):
        star = star_tree(n)
        for G in enumerate_trees(n):
            assert shares_cut(G, star) == min(G.root_cuts)

    def test_leaf_counts_must_match(self):
        with pytest.raises(ContractError):
            shares_cut(star_tree(3), star_tree(4))


class TestRetract:
    def test_three_leaves(self):
        R1, R2 = retract_pair(RootedTree.parse("(1 (2 3))"), RootedTree.parse("((1 2) 3)"))
        assert R1 == star_tree(3)
        assert R2 == star_tree(3)

    def test_requires_disjoint_cuts(self):
        G = RootedTree.parse("((1 2) 3)")
        with pytest.raises(ContractError, match="already share"):
            retract_pair(G, G)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_exhaustive_postconditions(self, n):
        trees = enumerate_trees(n)
        checked = 0
        for G1 in trees:
            for G2 in trees:
                if shares_cut(G1, G2) is not None:
                    continue
                R1, R2 = retract_pair(G1, G2)
                assert check_retract(G1, G2, R1, R2) == []
                checked += 1
        assert checked > 0

    def test_merge_candidate(self):
        G = RootedTree.parse("((1 2) 3)")
        assert merge_candidate(G, G) == G
        assert merge_candidate(RootedTree.parse("(1 (2 3))"), G) == star_tree(3)


class TestCoverage:
    def test_two_leaves(self):
        report = coverage_report(2, RegionParams(c_sep=100, c_comp=1.5), 1000, seed=1)
        assert report.uncovered_fraction == 0

    def test_three_leaves_covered(self):
        report = coverage_report(3, RegionParams(c_sep=4, c_comp=4), 100_000, seed=2)
        assert report.uncovered_fraction == 0
        assert sum(report.hits.values()) >= 100_000

    def test_three_leaves_gap(self):
        report = coverage_report(3, RegionParams(c_sep=4, c_comp=2), 20_000, seed=3)
        assert report.uncovered_fraction > 0
        ratios = [g[0] / g[1] for g in report.uncovered_points]
        assert all(2 < t < 4 or 1 / 4 < t < 1 / 2 for t in ratios)

    def test_deterministic(self):
        rp = RegionParams(c_sep=8, c_comp=4)
        first = coverage_report(4, rp, 5000, seed=9)
        second = coverage_report(4, rp, 5000, seed=9)
        assert first.hits == second.hits
        assert first.uncovered_fraction == second.uncovered_fraction

    def test_rows(self):
        report = coverage_report(3, RegionParams(c_sep=4, c_comp=4), 100, seed=0)
        rows = report.rows()
        assert [r["tree_id"] for r in rows] == [0, 1, 2]
        assert set(rows[0]) == {"tree_id", "tree", "hits"}

    def test_size_guard(self):
        with pytest.raises(SizeGuardError):
            coverage_report(7, RegionParams(), 10)
