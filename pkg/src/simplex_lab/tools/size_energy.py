# src/simplex_lab/tools/size_energy.py
"""Size, John-Nirenberg size and energy of coefficient sequences on tile collections.

A sequence attaches one complex number a_P to slot j of every vector tile P
of a collection. Trees are enumerated through their tops: for every member
tile t and every slot i the maximal i-tree with top t holds all P with
P_i <= t_i. Every functional below maximizes over those candidate trees.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from simplex_lab.errors import ContractError, SizeGuardError
from simplex_lab.tools.dyadic_geometry import ShiftedDyadicInterval, dilate
from simplex_lab.tools.grid_core import GridFunction
from simplex_lab.tools.statistics import linear_fit
from simplex_lab.tools.tile_model import (
    MIN_CELLS,
    TileCollection,
    VectorTile,
    make_wave_packet,
    order_relations,
)

logger = logging.getLogger(__name__)

MAX_TILES = 512
MAX_LEVELS = 256
SLACK = 1e-9
THETA_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class CoeffSequence:
    """Coefficients a_P on slot ``slot`` (0-based) of each vector tile, in collection order.

    ``normalization`` is the total top length a dual sequence was scaled
    against; it stays unset for raw sequences.
    """

    values: np.ndarray
    slot: int
    normalization: float | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.ndim != 1:
            raise ContractError(f"Coefficients must be one-dimensional, got shape {values.shape}")
        if self.slot < 0:
            raise ContractError(f"Slot must be non-negative, got {self.slot}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, coll: TileCollection, slot: int) -> CoeffSequence:
        return cls(np.zeros(len(coll)), slot)

    @classmethod
    def from_mapping(
        cls, coll: TileCollection, mapping: Mapping[VectorTile, complex], slot: int
    ) -> CoeffSequence:
        unknown = set(mapping) - set(coll.tiles)
        if unknown:
            raise ContractError(f"{len(unknown)} coefficients name tiles outside the collection")
        return cls(np.array([mapping.get(p, 0) for p in coll.tiles]), slot)

    def __len__(self) -> int:
        return self.values.size

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def scaled(self, factor: complex) -> CoeffSequence:
        return CoeffSequence(self.values * factor, self.slot, self.normalization)


@dataclass(frozen=True)
class TileTree:
    """An i-tree of a collection: every member P has P_i <= (P_T)_i for the top P_T."""

    top: int
    kind: int
    members: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"top": self.top, "kind": self.kind, "members": list(self.members)}


@dataclass(frozen=True, eq=False)
class _Geometry:
    length: np.ndarray
    time_lo: np.ndarray
    time_hi: np.ndarray
    time_overlap: np.ndarray
    below: tuple[np.ndarray, ...]
    same: tuple[np.ndarray, ...]
    double_overlap: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.below)


def _integers(values: Sequence[Fraction]) -> np.ndarray:
    denominator = math.lcm(*(v.denominator for v in values))
    return np.array([int(v * denominator) for v in values], dtype=np.int64)


@lru_cache(maxsize=32)
def _geometry(coll: TileCollection) -> _Geometry:
    """Pairwise order data of a collection; entry [t, p] of ``below[i]`` is P_i <= t_i."""
    tiles = coll.tiles
    count = len(tiles)
    time = _integers([x for p in tiles for x in p.time.endpoints()]).reshape(count, 2)
    lo, hi = time[:, 0], time[:, 1]
    inside = (lo[:, None] <= lo[None, :]) & (hi[None, :] <= hi[:, None])
    equal_time = (lo[:, None] == lo[None, :]) & (hi[:, None] == hi[None, :])
    overlap = (lo[:, None] < hi[None, :]) & (lo[None, :] < hi[:, None])

    below, same, double = [], [], []
    for i in range(coll.dim):
        bounds = []
        for p in tiles:
            omega = p.freqs[i]
            bounds.extend(omega.endpoints())
            bounds.extend(dilate(omega, 3).sides[0])
            bounds.extend(dilate(omega, 2).sides[0])
        b = _integers(bounds).reshape(count, 6)
        equal = equal_time & (b[:, None, 0] == b[None, :, 0]) & (b[:, None, 1] == b[None, :, 1])
        nested = (b[None, :, 2] <= b[:, None, 2]) & (b[:, None, 3] <= b[None, :, 3])
        below.append((inside & ~equal_time & nested) | equal)
        same.append(equal)
        double.append((b[:, None, 4] < b[None, :, 5]) & (b[None, :, 4] < b[:, None, 5]))

    return _Geometry(
        length=np.array([float(p.time.length) for p in tiles]),
        time_lo=np.array([float(p.time.left) for p in tiles]),
        time_hi=np.array([float(p.time.right) for p in tiles]),
        time_overlap=overlap,
        below=tuple(below),
        same=tuple(same),
        double_overlap=tuple(double),
    )


def _check_sequence(coll: TileCollection, seq: CoeffSequence) -> None:
    if not coll.tiles:
        raise ContractError("Empty tile collection")
    if len(coll) > MAX_TILES:
        raise SizeGuardError(f"Collection of {len(coll)} tiles exceeds the limit {MAX_TILES}")
    if len(seq) != len(coll):
        raise ContractError(f"{len(seq)} coefficients for a collection of {len(coll)} tiles")
    if coll.dim < 2:
        raise ContractError("Trees of another slot need vector tiles of dimension >= 2")
    if seq.slot >= coll.dim:
        raise ContractError(f"Slot {seq.slot} out of range for dimension {coll.dim}")


def _prepare(coll: TileCollection, seq: CoeffSequence) -> tuple[_Geometry, np.ndarray]:
    _check_sequence(coll, seq)
    return _geometry(coll), seq.weights


def _tree_means(geo: _Geometry, weights: np.ndarray, slot: int) -> np.ndarray:
    """Squared means |I_t|^-1 sum |a|^2 of every maximal i-tree, shape (dim, #tops)."""
    means = np.full((geo.dim, weights.size), -np.inf)
    for i, below in enumerate(geo.below):
        if i != slot:
            means[i] = (below @ weights) / geo.length
    return means


def _size(
    geo: _Geometry, weights: np.ndarray, slot: int, mask: np.ndarray | None = None
) -> tuple[float, TileTree | None]:
    if mask is not None:
        weights = np.where(mask, weights, 0.0)
    means = _tree_means(geo, weights, slot)
    kind, top = np.unravel_index(np.argmax(means), means.shape)
    best = float(means[kind, top])
    if best <= 0:
        return 0.0, None
    members = np.flatnonzero(geo.below[kind][top] & (weights > 0))
    return math.sqrt(best), TileTree(int(top), int(kind), tuple(members.tolist()))


@dataclass
class SizeResult:
    value: float
    witness: TileTree | None


def size(coll: TileCollection, seq: CoeffSequence) -> SizeResult:
    """
    Largest (|I_T|^-1 sum_{P in T} |a_P|^2)^(1/2) over i-trees with i != slot.

    Raises:
        ContractError: If the collection is empty or does not match the sequence
    """
    geo, weights = _prepare(coll, seq)
    value, witness = _size(geo, weights, seq.slot)
    return SizeResult(value, witness)


def _weak_l1(lo: np.ndarray, hi: np.ndarray, density: np.ndarray) -> float:
    """sup_t t |{(sum density_P chi_[lo_P, hi_P))^(1/2) > t}|, exact for step functions."""
    edges = np.unique(np.concatenate([lo, hi]))
    jumps = np.zeros(edges.size)
    np.add.at(jumps, np.searchsorted(edges, lo), density)
    np.add.at(jumps, np.searchsorted(edges, hi), -density)
    level = np.sqrt(np.maximum(np.cumsum(jumps)[:-1], 0.0))
    width = np.diff(edges)
    order = np.argsort(-level, kind="stable")
    return float(np.max(level[order] * np.cumsum(width[order])))


def size_jn(coll: TileCollection, seq: CoeffSequence) -> float:
    """Largest |I_T|^-1 ||(sum_{P in T} |a_P|^2 / |I_P| chi_{I_P})^(1/2)||_{1,inf} over trees."""
    geo, weights = _prepare(coll, seq)
    best = 0.0
    for i, below in enumerate(geo.below):
        if i == seq.slot:
            continue
        for top in range(len(coll)):
            members = below[top] & (weights > 0)
            if not members.any():
                continue
            quasinorm = _weak_l1(
                geo.time_lo[members], geo.time_hi[members], weights[members] / geo.length[members]
            )
            best = max(best, quasinorm / geo.length[top])
    return best


@dataclass
class EnergyResult:
    """Best level n, its strongly disjoint family and value 2^n (sum |I_T|)^(1/2)."""

    value: float
    level: int | None
    family: list[TileTree]
    top_length: float
    levels: tuple[int, int] | None
    interior: bool = False
    problems: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return not self.problems

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "level": self.level,
            "top_length": self.top_length,
            "levels": list(self.levels) if self.levels else None,
            "interior": self.interior,
            "family": [tree.to_dict() for tree in self.family],
            "problems": self.problems,
        }


def _levels(geo: _Geometry, weights: np.ndarray, slot: int) -> tuple[int, int] | None:
    nonzero = weights > 0
    if not nonzero.any():
        return None
    smallest = math.sqrt(float(np.min(weights[nonzero] / geo.length[nonzero])))
    largest, _ = _size(geo, weights, slot)
    return math.floor(math.log2(smallest)) - 1, math.ceil(math.log2(largest)) + 1


def _strongly_disjoint(geo: _Geometry, slot: int, A: TileTree, B: TileTree) -> bool:
    a, b = np.asarray(A.members), np.asarray(B.members)
    if geo.same[slot][np.ix_(a, b)].any():
        return False
    close = geo.double_overlap[slot][np.ix_(a, b)]
    if not close.any():
        return True
    if (close & geo.time_overlap[b, A.top][None, :]).any():
        return False
    return not (close & geo.time_overlap[a, B.top][:, None]).any()


def _family_at(
    geo: _Geometry, weights: np.ndarray, slot: int, n: int, candidates: list[tuple[int, int]]
) -> list[TileTree]:
    low, high = 4.0**n, 4.0 ** (n + 1)
    remaining = weights > 0
    family: list[TileTree] = []
    for kind, top in candidates:
        members = geo.below[kind][top] & remaining
        if not members.any():
            continue
        if float(weights[members].sum()) < low * geo.length[top] * (1 - SLACK):
            continue
        if _size(geo, weights, slot, members)[0] ** 2 > high * (1 + SLACK):
            continue
        tree = TileTree(top, kind, tuple(np.flatnonzero(members).tolist()))
        if all(_strongly_disjoint(geo, slot, tree, other) for other in family):
            family.append(tree)
            remaining &= ~members
    return family


def energy(coll: TileCollection, seq: CoeffSequence, *, verify: bool = True) -> EnergyResult:
    """
    Greedy energy: for every level n, pack strongly disjoint trees of mean >= 2^n.

    Candidate tops are visited by decreasing |I_T|. A candidate is the
    maximal tree of its top among unused tiles; it is kept when its mean
    reaches 2^n, none of its subtrees exceeds 2^(n+1) and it is strongly
    disjoint from the trees already kept. The level scan covers
    [floor(log2 min |a|/|I|^(1/2)) - 1, ceil(log2 size) + 1].

    Raises:
        SizeGuardError: If the collection exceeds 512 tiles
    """
    geo, weights = _prepare(coll, seq)
    slot = seq.slot
    levels = _levels(geo, weights, slot)
    if levels is None:
        return EnergyResult(0.0, None, [], 0.0, None, interior=True)

    candidates = sorted(
        ((kind, top) for kind in range(geo.dim) if kind != slot for top in range(len(coll))),
        key=lambda c: (-geo.length[c[1]], c[1], c[0]),
    )
    best = EnergyResult(0.0, None, [], 0.0, levels)
    for n in range(levels[0], levels[1] + 1):
        family = _family_at(geo, weights, slot, n, candidates)
        if not family:
            continue
        top_length = float(sum(geo.length[tree.top] for tree in family))
        value = 2.0**n * math.sqrt(top_length)
        if value > best.value:
            best = EnergyResult(value, n, family, top_length, levels)

    best.interior = best.level is not None and levels[0] < best.level < levels[1]
    if not best.interior:
        logger.debug("Energy optimum at level %s sits on the scan boundary %s", best.level, levels)
    if verify:
        best.problems = verify_energy(coll, seq, best)
        if best.problems:
            logger.warning("Energy certificate failed: %s", best.problems[0])
    return best


def _strongly_disjoint_exact(
    coll: TileCollection, slot: int, A: TileTree, B: TileTree
) -> str | None:
    top_a, top_b = coll.tiles[A.top].time, coll.tiles[B.top].time
    for p in A.members:
        P = coll.tiles[p]
        for q in B.members:
            Q = coll.tiles[q]
            if P.tiles[slot] == Q.tiles[slot]:
                return f"tiles {p} and {q} share component {slot}"
            if not dilate(P.freqs[slot], 2).overlaps(dilate(Q.freqs[slot], 2)):
                continue
            if Q.time.box().overlaps(top_a.box()) or P.time.box().overlaps(top_b.box()):
                return f"tiles {p} and {q} are close in frequency and meet the other top"
    return None


def verify_energy(coll: TileCollection, seq: CoeffSequence, result: EnergyResult) -> list[str]:
    """Re-check an energy certificate with exact rational tile relations."""
    problems: list[str] = []
    if result.level is None:
        if np.any(seq.weights > 0):
            problems.append("nonzero sequence without an energy level")
        return problems

    geo, weights = _prepare(coll, seq)
    n = result.level
    for tree in result.family:
        if tree.kind == seq.slot:
            problems.append(f"tree with top {tree.top} is a tree of the sequence slot")
        top = coll.tiles[tree.top].tiles[tree.kind]
        for p in tree.members:
            member = coll.tiles[p].tiles[tree.kind]
            if "le" not in order_relations(top, member, coll.rank1_constant):
                problems.append(f"tile {p} is not below top {tree.top}")
        mass = float(sum(weights[p] for p in tree.members))
        if mass < 4.0**n * geo.length[tree.top] * (1 - SLACK):
            problems.append(f"tree with top {tree.top} has mean below 2^{n}")
        mask = np.zeros(len(coll), dtype=bool)
        mask[list(tree.members)] = True
        if _size(geo, weights, seq.slot, mask)[0] ** 2 > 4.0 ** (n + 1) * (1 + SLACK):
            problems.append(f"tree with top {tree.top} has a subtree above 2^{n + 1}")
    for a, A in enumerate(result.family):
        for B in result.family[a + 1 :]:
            reason = _strongly_disjoint_exact(coll, seq.slot, A, B)
            if reason:
                problems.append(reason)
    top_length = sum(float(coll.tiles[t.top].time.length) for t in result.family)
    if not math.isclose(result.value, 2.0**n * math.sqrt(top_length), rel_tol=1e-12):
        problems.append("energy value does not match its family")
    return problems


def dual_sequence(coll: TileCollection, seq: CoeffSequence, result: EnergyResult) -> CoeffSequence:
    """c_P = a_P / (2^(n+1) (sum |I_T|)^(1/2)) on the energy family, zero elsewhere.

    Raises:
        ContractError: If the sequence has no energy family (it vanishes)
    """
    _check_sequence(coll, seq)
    if result.level is None or not result.family:
        raise ContractError("A vanishing sequence has no dual sequence")
    members = sorted({p for tree in result.family for p in tree.members})
    scale = 2.0 ** (result.level + 1) * math.sqrt(result.top_length)
    values = np.zeros(len(coll), dtype=np.complex128)
    values[members] = seq.values[members] / scale
    return CoeffSequence(values, seq.slot, result.top_length)


def dual_normalization_ratio(coll: TileCollection, c: CoeffSequence) -> float:
    """max over trees T' of (sum_{P in T'} |c_P|^2) * sum|I_T| / |I_T'|; admissible when <= 1."""
    if c.normalization is None:
        raise ContractError("Coefficient sequence carries no normalization")
    geo, weights = _prepare(coll, c)
    value, _ = _size(geo, weights, c.slot)
    return value**2 * c.normalization


def bessel_sum(
    collP: TileCollection,
    collQ: TileCollection,
    cP: CoeffSequence,
    cQ: CoeffSequence,
    N: int,
    L: float,
    smoothness: int = 6,
) -> complex:
    """
    sum over |I_P| <= |I_Q| of c_P c_Q <Phi_{P_i}, Phi_{Q_j}>, i and j the sequence slots.

    Raises:
        ContractError: If either sequence violates its dual normalization
    """
    for name, coll, c in (("P", collP, cP), ("Q", collQ, cQ)):
        ratio = dual_normalization_ratio(coll, c)
        if ratio > 1 + SLACK:
            raise ContractError(f"Coefficients on {name} violate the tree normalization ({ratio})")

    P = np.flatnonzero(cP.values)
    Q = np.flatnonzero(cQ.values)
    if not P.size or not Q.size:
        return 0j

    def packets(coll: TileCollection, slot: int, index: np.ndarray) -> np.ndarray:
        return np.array(
            [
                make_wave_packet(coll.tiles[p].tiles[slot], smoothness, N, L).function.samples
                for p in index
            ]
        )

    gram = packets(collP, cP.slot, P) @ packets(collQ, cQ.slot, Q).conj().T * (L / N)
    lengthP = np.array([float(collP.tiles[p].time.length) for p in P])
    lengthQ = np.array([float(collQ.tiles[q].time.length) for q in Q])
    admissible = lengthP[:, None] <= lengthQ[None, :]
    terms = cP.values[P][:, None] * cQ.values[Q][None, :] * gram
    return complex(np.sum(terms[admissible]))


def packet_coefficients(
    coll: TileCollection, f: GridFunction, slot: int, smoothness: int = 6
) -> CoeffSequence:
    """a_P = <f, Phi_{P_slot}> on the grid of f."""
    values = [
        f.inner(make_wave_packet(p.tiles[slot], smoothness, f.N, f.period).function)
        for p in coll.tiles
    ]
    return CoeffSequence(np.array(values), slot)


def energy_l2_check(
    coll: TileCollection, f: GridFunction, slot: int, smoothness: int = 6
) -> float:
    """energy of the packet coefficients of f divided by ||f||_2 (0 for f = 0)."""
    norm = math.sqrt(max(f.inner(f).real, 0.0))
    if norm == 0:
        return 0.0
    return energy(coll, packet_coefficients(coll, f, slot, smoothness)).value / norm


def random_sequence(
    coll: TileCollection, slot: int, seed: int, density: float = 1.0
) -> CoeffSequence:
    """Complex Gaussian coefficients, each kept with probability ``density``."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(len(coll)) + 1j * rng.standard_normal(len(coll))
    values[rng.random(len(coll)) >= density] = 0
    return CoeffSequence(values, slot)


@dataclass
class ToolCheck:
    lhs: float
    rhs: float
    ratio: float
    sizes: list[float]
    energies: list[float]

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "sizes": self.sizes,
            "energies": self.energies,
        }


def _power(base: float, exponent: float) -> float:
    return 1.0 if exponent == 0 else base**exponent


def tool_check(
    coll: TileCollection, seqs: Sequence[CoeffSequence], thetas: Sequence[float]
) -> ToolCheck:
    """
    Compare |sum_P |I_P|^-(d-2)/2 prod_j a^j_P| with prod_j size_j^theta_j energy_j^(1-theta_j).

    Raises:
        ContractError: If d < 3, a sequence sits in the wrong slot, some
            theta_j leaves [0, 1) or the thetas do not sum to d - 2
    """
    d = len(seqs)
    if d < 3:
        raise ContractError(f"The interpolation bound needs d >= 3 sequences, got {d}")
    if len(thetas) != d:
        raise ContractError(f"{len(thetas)} exponents for {d} sequences")
    if coll.dim != d:
        raise ContractError(f"Collection of dimension {coll.dim} with {d} sequences")
    for j, (seq, theta) in enumerate(zip(seqs, thetas)):
        if seq.slot != j:
            raise ContractError(f"Sequence {j} is attached to slot {seq.slot}")
        if not 0 <= theta < 1:
            raise ContractError(f"theta_{j + 1} = {theta} outside [0, 1)")
    if abs(math.fsum(thetas) - (d - 2)) > THETA_TOLERANCE:
        raise ContractError(f"Exponents sum to {math.fsum(thetas)}, expected {d - 2}")

    lengths = np.array([float(p.time.length) for p in coll.tiles])
    product = np.prod(np.array([seq.values for seq in seqs]), axis=0)
    lhs = float(abs(np.sum(lengths ** (-(d - 2) / 2) * product)))
    sizes = [size(coll, seq).value for seq in seqs]
    energies = [energy(coll, seq).value for seq in seqs]
    rhs = math.prod(
        _power(s, theta) * _power(e, 1 - theta) for s, e, theta in zip(sizes, energies, thetas)
    )
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0 else math.inf
    return ToolCheck(lhs, rhs, ratio, sizes, energies)


@dataclass
class Stratum:
    level: int
    trees: list[TileTree]
    size_bound: float

    @property
    def tiles(self) -> tuple[int, ...]:
        return tuple(sorted(p for tree in self.trees for p in tree.members))

    def top_length(self, coll: TileCollection) -> float:
        return sum(float(coll.tiles[tree.top].time.length) for tree in self.trees)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "size_bound": self.size_bound,
            "trees": [tree.to_dict() for tree in self.trees],
        }


@dataclass
class Stratification:
    strata: list[Stratum]
    residual: tuple[int, ...]
    energy: float
    size: float
    c_strat: float

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "size": self.size,
            "c_strat": self.c_strat,
            "residual": list(self.residual),
            "strata": [stratum.to_dict() for stratum in self.strata],
        }


def stratify(coll: TileCollection, seq: CoeffSequence) -> Stratification:
    """
    Split a collection into levels of trees by repeated size stopping times.

    Starting at n = floor(log2(E/S)), level n removes maximal trees of mean
    above 2^(-n-1) E until the size of what remains drops to that value.
    Tiles carrying a zero coefficient form the residual.

    Raises:
        SizeGuardError: If the level loop does not terminate
    """
    geo, weights = _prepare(coll, seq)
    slot = seq.slot
    everything = tuple(range(len(coll)))
    S, _ = _size(geo, weights, slot)
    if S == 0:
        return Stratification([Stratum(0, [], 0.0)], everything, 0.0, 0.0, 0.0)

    E = energy(coll, seq, verify=False).value
    n = math.floor(math.log2(E / S))
    remaining = weights > 0
    strata: list[Stratum] = []
    for _ in range(MAX_LEVELS):
        if not remaining.any():
            break
        threshold = 4.0 ** (-n - 1) * E**2
        trees = []
        while remaining.any():
            means = _tree_means(geo, np.where(remaining, weights, 0.0), slot)
            kind, top = np.unravel_index(np.argmax(means), means.shape)
            if means[kind, top] <= threshold:
                break
            members = geo.below[kind][top] & remaining
            trees.append(TileTree(int(top), int(kind), tuple(np.flatnonzero(members).tolist())))
            remaining &= ~members
        if trees:
            strata.append(Stratum(n, trees, min(2.0**-n * E, S)))
        n += 1
    else:
        raise SizeGuardError(f"Stratification did not finish within {MAX_LEVELS} levels")

    c_strat = max(stratum.top_length(coll) / 4.0**stratum.level for stratum in strata)
    residual = tuple(np.flatnonzero(weights == 0).tolist())
    logger.debug("stratify: %d strata, C_strat = %.3g", len(strata), c_strat)
    return Stratification(strata, residual, E, S, c_strat)


def verify_stratification(
    coll: TileCollection, seq: CoeffSequence, strat: Stratification
) -> list[str]:
    """Re-check partition, per-level size bounds and the reported C_strat."""
    geo, weights = _prepare(coll, seq)
    problems: list[str] = []
    seen = [p for stratum in strat.strata for p in stratum.tiles] + list(strat.residual)
    if sorted(seen) != list(range(len(coll))):
        problems.append("strata and residual do not partition the collection")
    if np.any(weights[list(strat.residual)] > 0):
        problems.append("residual holds nonzero coefficients")
    for stratum in strat.strata:
        n = stratum.level
        for tree in stratum.trees:
            inside = geo.below[tree.kind][tree.top][list(tree.members)]
            if tree.kind == seq.slot or not inside.all():
                problems.append(f"level {n}: tree with top {tree.top} is not a tree")
        mask = np.zeros(len(coll), dtype=bool)
        mask[list(stratum.tiles)] = True
        value, _ = _size(geo, weights, seq.slot, mask)
        bound = min(2.0**-n * strat.energy, strat.size)
        if value > bound * (1 + SLACK) or stratum.size_bound > bound * (1 + SLACK):
            problems.append(f"level {n}: size {value} exceeds {bound}")
        if stratum.top_length(coll) / 4.0**n > strat.c_strat * (1 + SLACK):
            problems.append(f"level {n}: top length exceeds C_strat 2^(2n)")
    return problems


@dataclass(frozen=True)
class SeparatedCollections:
    """Tile collections P and Q placed at normalized distance 2^k from point sets.

    Every P satisfies dist(I_P, anchors_p) = 2^k1 |I_P| and every Q satisfies
    dist(I_Q, anchors_q) = 2^k2 |I_Q|, with anchors_p a proper subset of
    anchors_q.
    """

    coll_p: TileCollection
    coll_q: TileCollection
    anchors_p: tuple[float, ...]
    anchors_q: tuple[float, ...]

    def distance_ratios(self, which: str) -> list[float]:
        """dist(I, anchors)/|I| for every tile of collection ``which`` ("p" or "q")."""
        coll, anchors = (
            (self.coll_p, self.anchors_p) if which == "p" else (self.coll_q, self.anchors_q)
        )
        ratios = []
        for tile in coll.tiles:
            lo, hi = float(tile.time.left), float(tile.time.right)
            gap = min(lo - a if a < lo else max(a - hi, 0.0) for a in anchors)
            ratios.append(gap / float(tile.time.length))
        return ratios


def separation_host(k2_max: int, scales: Sequence[int]) -> tuple[int, float]:
    """Smallest (N, L) holding every Q tile of scale <= max(scales) around L/4 and 3L/4."""
    L = 2.0 ** math.ceil(math.log2(4 * (2**k2_max + 2) * 2.0 ** max(scales)))
    return int(MIN_CELLS * L / 2.0 ** min(scales)), L


def separated_collections(
    k1: int,
    k2: int,
    L: float,
    offsets: Sequence[int] = (0, 8, 12),
    scales: Sequence[int] = (0,),
) -> SeparatedCollections:
    """Tiles of every scale on both sides of their anchors.

    P sits around L/4 and Q around L/4 and 3L/4, so P and Q meet at the
    common anchor while Q has one of its own. ``scales=(0,)`` gives the
    unit-scale pair.

    Raises:
        ContractError: If no scale is given or a tile leaves [0, L)
    """
    scales = sorted(set(int(s) for s in scales))
    if not scales:
        raise ContractError("separated_collections needs at least one scale")
    anchors_p = (L / 4,)
    anchors_q = (L / 4, 3 * L / 4)

    def around(anchors: tuple[float, ...], k: int) -> TileCollection:
        tiles = []
        for s in scales:
            size = 2.0**s
            freqs = tuple(ShiftedDyadicInterval(-s, c, 0) for c in offsets)
            for anchor in anchors:
                base = anchor / size
                if base != int(base):
                    raise ContractError(f"Anchor {anchor} is not a multiple of 2^{s}")
                for x in (int(base) + 2**k, int(base) - 2**k - 1):
                    if x < 0 or (x + 1) * size > L:
                        raise ContractError(f"Tile 2^{s}[{x}, {x + 1}) leaves [0, {L})")
                    tiles.append(VectorTile(ShiftedDyadicInterval(s, x, 0), freqs))
        return TileCollection(tuple(tiles))

    return SeparatedCollections(around(anchors_p, k1), around(anchors_q, k2), anchors_p, anchors_q)


def dual_coefficients(coll: TileCollection, phases: np.ndarray, amplitude: float) -> CoeffSequence:
    """c_P = amplitude (|I_P| / sum |I|)^(1/2) e^(2 pi i phase) on slot 0, for one-tile trees."""
    lengths = np.array([float(p.time.length) for p in coll.tiles])
    total = float(lengths.sum())
    values = amplitude * np.sqrt(lengths / total) * np.exp(2j * np.pi * phases)
    return CoeffSequence(values, 0, total)


@dataclass
class DecayProbe:
    k1: int
    slope: float
    r_squared: float
    rows: list[dict]
    metadata: dict = field(default_factory=dict)


def delicate_decay_probe(
    k1: int = 1,
    k2_values: Sequence[int] = range(4, 10),
    trials: int = 4,
    seed: int = 0,
    *,
    smoothness: int = 6,
    amplitude: float = 1.0,
    scales: Sequence[int] = (0,),
) -> DecayProbe:
    """
    Fit log2 |bessel_sum| against k2 for one-tile trees separated from their anchors.

    Tiles of every scale in ``scales`` carry admissible coefficients with
    random phases (see ``dual_coefficients``), so the sum runs over every
    pair with |I_P| <= |I_Q|. Each k2 keeps the largest |sum| over
    ``trials`` draws. An all-zero sweep yields slope -inf.

    Raises:
        ContractError: If min(k2) <= k1 or no scale is given
    """
    k2_values = sorted(set(int(k) for k in k2_values))
    if k1 < 0 or not k2_values or k2_values[0] <= k1:
        raise ContractError(f"Need 0 <= k1 < min(k2), got k1={k1}, k2={k2_values}")
    if not 0 <= amplitude <= 1:
        raise ContractError(f"Amplitude {amplitude} breaks the tree normalization")
    scales = sorted(set(int(s) for s in scales))
    if not scales:
        raise ContractError("The decay probe needs at least one scale")
    N, L = separation_host(k2_values[-1], scales)
    rng = np.random.default_rng(seed)

    rows = []
    for k2 in k2_values:
        pair = separated_collections(k1, k2, L, scales=scales)
        best = 0.0
        for _ in range(trials):
            cP = dual_coefficients(pair.coll_p, rng.random(len(pair.coll_p)), amplitude)
            cQ = dual_coefficients(pair.coll_q, rng.random(len(pair.coll_q)), amplitude)
            value = bessel_sum(pair.coll_p, pair.coll_q, cP, cQ, N, L, smoothness)
            best = max(best, abs(value))
        rows.append(
            {"k2": k2, "value": best, "log2_value": math.log2(best) if best > 0 else -math.inf}
        )
    fit = linear_fit([r["k2"] for r in rows], [r["log2_value"] for r in rows])
    logger.info("decay probe k1=%d scales=%s: slope %.3g", k1, scales, fit["slope"])
    metadata = {"N": N, "L": L, "scales": scales}
    return DecayProbe(k1, fit["slope"], fit["r_squared"], rows, metadata)
