# src/simplex_lab/tools/simplex_trees.py
"""Rooted trees indexing the regions of the frequency simplex.

A tree in the class G_n has n leaves labeled 1..n from left to right and
every internal vertex has at least two sons. A vertex u covers the
contiguous leaf run {l_u, ..., r_u}. The gap |I_l| = xi_{l+1} - xi_l sits
between leaves l and l+1; the cut gaps of u are those indexed by the right
ends r of all sons except the last.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol, Sequence, Union

import numpy as np

from simplex_lab.errors import ContractError, SizeGuardError
from simplex_lab.tools.dyadic_geometry import RegionParams

logger = logging.getLogger(__name__)

MAX_ENUMERATION = 8
MAX_COVERAGE = 6

Nested = Union[int, list["Nested"]]


class SeparationConstants(Protocol):
    c_sep: float
    c_comp: float


@dataclass(frozen=True)
class Node:
    index: int
    parent: int | None
    children: tuple[int, ...]
    level: int
    lo: int
    hi: int
    label: int | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class RootedTree:
    """Arena of nodes in level order; node 0 is the root."""

    nodes: tuple[Node, ...]
    _nested: Nested = field(repr=False)

    @classmethod
    def from_nested(cls, nested: Nested) -> RootedTree:
        """Build from nested lists of leaf labels, e.g. [[1, 2], 3].

        Raises:
            ContractError: If a vertex has one son or labels are not 1..n in order
        """
        nested = _normalize(nested)
        labels = _leaf_labels(nested)
        if labels != list(range(1, len(labels) + 1)):
            raise ContractError(f"Leaves must be labeled 1..n left to right, got {labels}")

        # breadth-first numbering
        nodes: list[dict] = []
        queue: list[tuple[Nested, int | None, int]] = [(nested, None, 0)]
        while queue:
            item, parent, level = queue.pop(0)
            index = len(nodes)
            leaves = _leaf_labels(item)
            nodes.append(
                {
                    "index": index,
                    "parent": parent,
                    "children": [],
                    "level": level,
                    "lo": leaves[0],
                    "hi": leaves[-1],
                    "label": item if isinstance(item, int) else None,
                }
            )
            if parent is not None:
                nodes[parent]["children"].append(index)
            if isinstance(item, list):
                queue.extend((child, index, level + 1) for child in item)
        frozen = tuple(Node(**{**n, "children": tuple(n["children"])}) for n in nodes)
        return cls(frozen, nested)

    @classmethod
    def parse(cls, text: str) -> RootedTree:
        """Parse the nested-parenthesis form, e.g. "((1 2) 3)"."""
        tokens = re.findall(r"\(|\)|\d+", text)
        if "".join(tokens) != re.sub(r"[\s,]+", "", text):
            raise ContractError(f"Unexpected characters in tree string {text!r}")
        position = 0

        def read() -> Nested:
            nonlocal position
            if position >= len(tokens):
                raise ContractError(f"Unbalanced tree string {text!r}")
            token = tokens[position]
            position += 1
            if token == "(":
                items = []
                while position < len(tokens) and tokens[position] != ")":
                    items.append(read())
                if position >= len(tokens):
                    raise ContractError(f"Unbalanced tree string {text!r}")
                position += 1
                return items
            if token == ")":
                raise ContractError(f"Unbalanced tree string {text!r}")
            return int(token)

        nested = read()
        if position != len(tokens):
            raise ContractError(f"Trailing tokens in tree string {text!r}")
        return cls.from_nested(nested)

    @classmethod
    def from_json(cls, text: str) -> RootedTree:
        return cls.from_nested(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self._nested)

    def to_string(self) -> str:
        return _format(self._nested)

    def __str__(self) -> str:
        return self.to_string()

    def __eq__(self, other) -> bool:
        return isinstance(other, RootedTree) and self._nested == other._nested

    def __hash__(self) -> int:
        return hash(self.to_string())

    @property
    def nested(self) -> Nested:
        return self._nested

    @property
    def root(self) -> Node:
        return self.nodes[0]

    @property
    def n(self) -> int:
        return self.root.hi

    @cached_property
    def internal_vertices(self) -> tuple[Node, ...]:
        return tuple(node for node in self.nodes if not node.is_leaf)

    @cached_property
    def degree_sequence(self) -> tuple[int, ...]:
        return tuple(len(node.children) for node in self.nodes)

    @property
    def height(self) -> int:
        return max(node.level for node in self.nodes)

    def node(self, u: int | Node) -> Node:
        """Resolve a vertex handle belonging to this tree.

        Raises:
            ContractError: For indices out of range or nodes of another tree
        """
        if isinstance(u, Node):
            if u.index < len(self.nodes) and self.nodes[u.index] == u:
                return u
            raise ContractError(f"Vertex {u} does not belong to tree {self}")
        if isinstance(u, (int, np.integer)) and 0 <= u < len(self.nodes):
            return self.nodes[int(u)]
        raise ContractError(f"Vertex handle {u!r} is not a vertex of {self}")

    def sons(self, u: int | Node) -> tuple[Node, ...]:
        return tuple(self.nodes[c] for c in self.node(u).children)

    def cuts(self, u: int | Node) -> tuple[int, ...]:
        """Right ends r_{u_i} of all sons but the last."""
        return tuple(son.hi for son in self.sons(u)[:-1])

    @property
    def root_cuts(self) -> tuple[int, ...]:
        return self.cuts(0)

    def vertex_for(self, lo: int, hi: int) -> Node | None:
        for node in self.nodes:
            if node.lo == lo and node.hi == hi:
                return node
        return None

    def subtree(self, u: int | Node) -> Nested:
        node = self.node(u)
        if node.is_leaf:
            return node.label
        return [self.subtree(c) for c in node.children]

    def induced(self, lo: int, hi: int) -> Nested:
        """Restriction to leaves lo..hi, collapsing vertices left with one son."""
        return _restrict(self._nested, lo, hi)


def _normalize(nested) -> Nested:
    if isinstance(nested, (int, np.integer)) and not isinstance(nested, bool):
        return int(nested)
    if isinstance(nested, (list, tuple)):
        if len(nested) < 2:
            raise ContractError(f"Internal vertex {list(nested)} needs at least two sons")
        return [_normalize(child) for child in nested]
    raise ContractError(f"Cannot read tree element {nested!r}")


def _leaf_labels(nested: Nested) -> list[int]:
    if isinstance(nested, int):
        return [nested]
    return [label for child in nested for label in _leaf_labels(child)]


def _format(nested: Nested) -> str:
    if isinstance(nested, int):
        return str(nested)
    return "(" + " ".join(_format(child) for child in nested) + ")"


def _restrict(nested: Nested, lo: int, hi: int) -> Nested | None:
    if isinstance(nested, int):
        return nested if lo <= nested <= hi else None
    kept = [r for r in (_restrict(child, lo, hi) for child in nested) if r is not None]
    if not kept:
        return None
    return kept[0] if len(kept) == 1 else kept


def _shift(nested: Nested, offset: int) -> Nested:
    if isinstance(nested, int):
        return nested - offset
    return [_shift(child, offset) for child in nested]


def star_tree(n: int) -> RootedTree:
    """Height-one tree whose root sons are all n leaves."""
    if n < 2:
        return RootedTree.from_nested(1)
    return RootedTree.from_nested(list(range(1, n + 1)))


def _compositions(lo: int, hi: int):
    """Ways to split lo..hi into at least two contiguous blocks."""
    size = hi - lo + 1
    for mask in range(1, 2 ** (size - 1)):
        blocks, start = [], lo
        for bit in range(size - 1):
            if mask >> bit & 1:
                blocks.append((start, lo + bit))
                start = lo + bit + 1
        blocks.append((start, hi))
        yield blocks


def _trees_over(lo: int, hi: int, memo: dict) -> list[Nested]:
    if (lo, hi) in memo:
        return memo[lo, hi]
    if lo == hi:
        result: list[Nested] = [lo]
    else:
        result = []
        for blocks in _compositions(lo, hi):
            partial: list[list[Nested]] = [[]]
            for a, b in blocks:
                partial = [p + [t] for p in partial for t in _trees_over(a, b, memo)]
            result.extend(partial)
    memo[lo, hi] = result
    return result


def enumerate_trees(n: int) -> list[RootedTree]:
    """All trees of G_n, ordered by their level-order degree sequence.

    Raises:
        ContractError: If n < 1
        SizeGuardError: If n exceeds 8
    """
    if n < 1:
        raise ContractError(f"Tree size must be at least 1, got {n}")
    if n > MAX_ENUMERATION:
        raise SizeGuardError(f"Enumeration is limited to n <= {MAX_ENUMERATION}, got {n}")
    trees = [RootedTree.from_nested(t) for t in _trees_over(1, n, {})]
    trees.sort(key=lambda t: t.degree_sequence)
    logger.debug("Enumerated %d trees for n=%d", len(trees), n)
    return trees


def index_interval(G: RootedTree, u: int | Node) -> tuple[int, int]:
    node = G.node(u)
    return node.lo, node.hi


@dataclass(frozen=True, eq=False)
class RegionQuery:
    """Strictly increasing frequency vector xi_1 < ... < xi_n."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        if xi.ndim != 1 or xi.size < 1:
            raise ContractError("xi must be a non-empty vector")
        if np.any(np.diff(xi) <= 0):
            raise ContractError(f"xi must be strictly increasing, got {xi.tolist()}")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.xi)


def membership_from_gaps(
    G: RootedTree, gaps: np.ndarray, rp: SeparationConstants
) -> np.ndarray:
    """Vectorized region test for gap vectors of shape (..., n-1)."""
    gaps = np.asarray(gaps, dtype=float)
    if gaps.shape[-1] != G.n - 1:
        raise ContractError(f"Expected {G.n - 1} gaps per point, got {gaps.shape[-1]}")
    inside = np.ones(gaps.shape[:-1], dtype=bool)
    for u in G.internal_vertices:
        cut_idx = [c - 1 for c in G.cuts(u)]
        other_idx = [g - 1 for g in range(u.lo, u.hi) if g not in G.cuts(u)]
        cut = gaps[..., cut_idx]
        cut_min = cut.min(axis=-1)
        if len(cut_idx) > 1:
            inside &= cut.max(axis=-1) <= rp.c_comp * cut_min
        if other_idx:
            inside &= cut_min >= rp.c_sep * gaps[..., other_idx].max(axis=-1)
    return inside


def region_membership(
    G: RootedTree, q: RegionQuery | Sequence[float], rp: SeparationConstants
) -> bool:
    """Whether xi lies in the region R_G.

    Raises:
        ContractError: If xi is not strictly increasing or has the wrong length
    """
    if not isinstance(q, RegionQuery):
        q = RegionQuery(np.asarray(q, dtype=float))
    if q.xi.size != G.n:
        raise ContractError(f"Query has {q.xi.size} frequencies for a tree with {G.n} leaves")
    return bool(membership_from_gaps(G, q.gaps, rp))


def shares_cut(G1: RootedTree, G2: RootedTree) -> int | None:
    """Smallest root cut common to both trees, if any."""
    if G1.n != G2.n:
        raise ContractError(f"Trees have {G1.n} and {G2.n} leaves")
    common = set(G1.root_cuts) & set(G2.root_cuts)
    return min(common) if common else None


def _select(G: RootedTree, node: Node, avoid: set[int]) -> list[Node]:
    if node.is_leaf or not avoid.intersection(range(node.lo, node.hi)):
        return [node]
    return [v for son in G.sons(node) for v in _select(G, son, avoid)]


def _retract(G: RootedTree, avoid: set[int]) -> RootedTree:
    selected = [v for son in G.sons(0) for v in _select(G, son, avoid)]
    return RootedTree.from_nested([G.subtree(v) for v in selected])


def retract_pair(G1: RootedTree, G2: RootedTree) -> tuple[RootedTree, RootedTree]:
    """Retracts of two trees without a common root cut.

    Each root son that straddles a root cut of the other tree is replaced by
    its sons, recursively, so both retracts carry every cut of both roots.

    Raises:
        ContractError: If the trees already share a root cut
    """
    if shares_cut(G1, G2) is not None:
        raise ContractError(f"Trees {G1} and {G2} already share a root cut")
    s1, s2 = set(G1.root_cuts), set(G2.root_cuts)
    return _retract(G1, s2), _retract(G2, s1)


def check_retract(
    G1: RootedTree, G2: RootedTree, R1: RootedTree, R2: RootedTree
) -> list[str]:
    """Independent validation of a retract pair; returns the list of failures."""
    problems = []
    needed = set(G1.root_cuts) | set(G2.root_cuts)
    for name, G, R in (("first", G1, R1), ("second", G2, R2)):
        sons = R.sons(0)
        covered = [label for son in sons for label in range(son.lo, son.hi + 1)]
        if covered != list(range(1, G.n + 1)):
            problems.append(f"{name} retract does not partition 1..{G.n}")
        for son in sons:
            vertex = G.vertex_for(son.lo, son.hi)
            if vertex is None or G.subtree(vertex) != R.subtree(son):
                problems.append(f"{name} retract son {son.lo}..{son.hi} is not a vertex subtree")
        right_ends = {son.hi for son in sons if son.hi != G.n}
        if not needed <= right_ends:
            problems.append(f"{name} retract misses cuts {sorted(needed - right_ends)}")
    if shares_cut(R1, R2) is None:
        problems.append("retracts share no root cut")
    return problems


def merge_candidate(G1: RootedTree, G2: RootedTree) -> RootedTree:
    """Tree type predicted for the product of the two tree symbols.

    Equal trees give themselves. Trees without a common root cut are first
    retracted. Otherwise the root cuts are united and the induced trees on
    every block between consecutive cuts are merged recursively.
    """
    if G1 == G2:
        return G1
    if shares_cut(G1, G2) is None:
        G1, G2 = retract_pair(G1, G2)
        if G1 == G2:
            return G1
    cuts = sorted(set(G1.root_cuts) | set(G2.root_cuts))
    bounds = [0, *cuts, G1.n]
    blocks: list[Nested] = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        lo, hi = a + 1, b
        if lo == hi:
            blocks.append(lo)
            continue
        first = RootedTree.from_nested(_shift(G1.induced(lo, hi), lo - 1))
        second = RootedTree.from_nested(_shift(G2.induced(lo, hi), lo - 1))
        blocks.append(_shift(merge_candidate(first, second).nested, 1 - lo))
    return RootedTree.from_nested(blocks)


@dataclass
class CoverageReport:
    n: int
    region: RegionParams
    samples: int
    seed: int
    uncovered_fraction: float
    hits: dict[str, int]
    multiplicity: dict[int, int]
    uncovered_points: list[list[float]]

    def rows(self) -> list[dict]:
        return [
            {"tree_id": i, "tree": tree, "hits": count}
            for i, (tree, count) in enumerate(self.hits.items())
        ]


def sample_log_gaps(n: int, samples: int, seed: int, log_span: float = 8.0) -> np.ndarray:
    """Gap vectors with log2 entries uniform on [-log_span, log_span]."""
    rng = np.random.default_rng(seed)
    return 2.0 ** rng.uniform(-log_span, log_span, size=(samples, max(n - 1, 0)))


def coverage_report(
    n: int,
    rp: RegionParams,
    samples: int,
    seed: int = 0,
    *,
    log_span: float = 8.0,
    keep_uncovered: int = 10,
) -> CoverageReport:
    """Estimate how much of the simplex the regions R_G leave uncovered.

    Raises:
        SizeGuardError: If n exceeds 6
    """
    if n > MAX_COVERAGE:
        raise SizeGuardError(f"Coverage sampling is limited to n <= {MAX_COVERAGE}, got {n}")
    trees = enumerate_trees(n)
    gaps = sample_log_gaps(n, samples, seed, log_span)
    member = np.stack([membership_from_gaps(G, gaps, rp) for G in trees])
    counts = member.sum(axis=0)
    uncovered = counts == 0
    fraction = float(uncovered.mean()) if samples else 0.0
    if fraction:
        logger.warning("n=%d: %.4f of sampled gap vectors lie in no region", n, fraction)
    return CoverageReport(
        n=n,
        region=rp,
        samples=samples,
        seed=seed,
        uncovered_fraction=fraction,
        hits={str(G): int(row.sum()) for G, row in zip(trees, member)},
        multiplicity=dict(sorted(Counter(int(c) for c in counts).items())),
        uncovered_points=gaps[uncovered][:keep_uncovered].tolist(),
    )
