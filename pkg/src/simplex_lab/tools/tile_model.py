# src/simplex_lab/tools/tile_model.py
"""Time-frequency tiles, rank-1 collections, wave packets and the discrete model operators.

Tiles live in the units of the host grid: a time interval [2^j k, 2^j (k+1))
is a subset of the period [0, L), and frequencies are measured in cycles per
unit, so the grid resolves xi = k/L for k in [-N/2, N/2).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from simplex_lab.errors import ContractError, ResolutionError
from simplex_lab.tools.dyadic_geometry import QuasiCube, ShiftedDyadicInterval, is_sparse
from simplex_lab.tools.grid_core import GridFunction, Spectrum, idft
from simplex_lab.tools.simplex_trees import RootedTree
from simplex_lab.tools.symbol_factory import Bump1D

logger = logging.getLogger(__name__)

PACKET_SUPPORT = 0.9
MIN_CELLS = 8


@dataclass(frozen=True, order=True)
class Tile:
    """Rectangle I x omega of area one; I is a standard dyadic interval."""

    time: ShiftedDyadicInterval
    freq: ShiftedDyadicInterval

    def __post_init__(self):
        if self.time.alpha_index != 0:
            raise ContractError(f"Time interval must be standard dyadic, got {self.time}")
        if self.time.j + self.freq.j != 0:
            raise ContractError(
                f"Tile area must be one: |I| = 2^{self.time.j}, |omega| = 2^{self.freq.j}"
            )

    @property
    def area(self) -> Fraction:
        return self.time.length * self.freq.length

    def to_dict(self) -> dict:
        return {"time": self.time.to_dict(), "freq": self.freq.to_dict()}


@dataclass(frozen=True, order=True)
class VectorTile:
    time: ShiftedDyadicInterval
    freqs: tuple[ShiftedDyadicInterval, ...]

    def __post_init__(self):
        object.__setattr__(self, "freqs", tuple(self.freqs))
        for omega in self.freqs:
            Tile(self.time, omega)

    @property
    def dim(self) -> int:
        return len(self.freqs)

    @property
    def tiles(self) -> tuple[Tile, ...]:
        return tuple(Tile(self.time, omega) for omega in self.freqs)

    @property
    def cube(self) -> QuasiCube:
        return QuasiCube(self.freqs)

    def to_dict(self) -> dict:
        return {
            "time": {"j": self.time.j, "k": self.time.k},
            "freqs": [omega.to_dict() for omega in self.freqs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> VectorTile:
        time = ShiftedDyadicInterval(int(data["time"]["j"]), int(data["time"]["k"]))
        return cls(time, tuple(ShiftedDyadicInterval.from_dict(f) for f in data["freqs"]))


@dataclass(frozen=True)
class TileCollection:
    tiles: tuple[VectorTile, ...]
    rank1_constant: float = 32.0

    def __post_init__(self):
        object.__setattr__(self, "tiles", tuple(self.tiles))
        dims = {p.dim for p in self.tiles}
        if len(dims) > 1:
            raise ContractError(f"Vector tiles of mixed dimensions {sorted(dims)}")

    @property
    def dim(self) -> int | None:
        return self.tiles[0].dim if self.tiles else None

    def __len__(self) -> int:
        return len(self.tiles)

    def is_sparse(self, C: float = 2.0) -> bool:
        """Sparseness of the distinct frequency cubes."""
        return is_sparse(sorted({p.cube for p in self.tiles}), Fraction(C))

    def to_json(self) -> str:
        return json.dumps([p.to_dict() for p in self.tiles])

    @classmethod
    def from_json(cls, text: str, rank1_constant: float = 32.0) -> TileCollection:
        return cls(tuple(VectorTile.from_dict(d) for d in json.loads(text)), rank1_constant)


def _dilated(interval: ShiftedDyadicInterval, factor: Fraction) -> tuple[Fraction, Fraction]:
    half = interval.length * factor / 2
    return interval.center - half, interval.center + half


def _contains(outer: tuple[Fraction, Fraction], inner: tuple[Fraction, Fraction]) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


@dataclass(frozen=True)
class _TileGeometry:
    tile: Tile
    time: tuple[Fraction, Fraction]
    triple: tuple[Fraction, Fraction]
    wide: tuple[Fraction, Fraction]

    @classmethod
    def of(cls, tile: Tile, C: Fraction) -> _TileGeometry:
        triple = _dilated(tile.freq, Fraction(3))
        return cls(tile, tile.time.endpoints(), triple, _dilated(tile.freq, C))


def _relations(P: _TileGeometry, Q: _TileGeometry) -> set[str]:
    inside = _contains(P.time, Q.time)
    strictly = inside and Q.time != P.time
    relations = set()
    if strictly and _contains(Q.triple, P.triple):
        relations.add("lt")
    if "lt" in relations or P.tile == Q.tile:
        relations.add("le")
    if inside and _contains(Q.wide, P.wide):
        relations.add("lesssim")
    if "lesssim" in relations and "le" not in relations:
        relations.add("lesssim_prime")
    return relations


def order_relations(P: Tile, P2: Tile, C: float | Fraction = 32) -> set[str]:
    """Relations of P2 with respect to P: lt (P2 < P), le, lesssim and lesssim_prime."""
    C = Fraction(C)
    return _relations(_TileGeometry.of(P, C), _TileGeometry.of(P2, C))


@dataclass
class Rank1Report:
    ok: bool
    violations: list[tuple[int, int, int]] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [{"P": p, "P_prime": q, "condition": c} for p, q, c in self.violations]


def rank1_check(coll: TileCollection, max_violations: int = 100) -> Rank1Report:
    """Exhaustive pairwise check of the three rank-1 conditions.

    Violations are recorded as (index of P, index of P', condition number).
    """
    C = Fraction(coll.rank1_constant)
    geometry = [[_TileGeometry.of(t, C) for t in p.tiles] for p in coll.tiles]
    violations: list[tuple[int, int, int]] = []
    for a, P in enumerate(coll.tiles):
        for b, Q in enumerate(coll.tiles):
            if a == b:
                continue
            if a < b and any(x == y for x, y in zip(P.tiles, Q.tiles)):
                violations.append((a, b, 1))
            relations = [_relations(geometry[a][i], geometry[b][i]) for i in range(P.dim)]
            below = [j for j, r in enumerate(relations) if "le" in r]
            if not below:
                continue
            if not all("lesssim" in r for r in relations):
                violations.append((a, b, 2))
            if C * Q.time.length < P.time.length:
                for j in below:
                    if not all("lesssim_prime" in relations[i] for i in range(P.dim) if i != j):
                        violations.append((a, b, 3))
                        break
            if len(violations) >= max_violations:
                return Rank1Report(False, violations)
    return Rank1Report(not violations, violations)


def lacunary_family(
    scales: Sequence[int],
    offsets: Sequence[int] = (0, 8, 12),
    max_tiles: int = 256,
    C: float = 32.0,
) -> TileCollection:
    """Standard model family: dyadic I of length 2^s, omega_i = 2^-s [c_i, c_i + 1).

    Time intervals tile [0, 2^max(scales)) at every scale, coarse scales
    first, until ``max_tiles`` vector tiles are produced. The family has
    rank 1 once C >= 2*max(offsets) + 1 and the first offset is the only one
    whose triple dilates nest.
    """
    if not scales:
        raise ContractError("lacunary_family needs at least one scale")
    if len(set(offsets)) != len(offsets):
        raise ContractError(f"Frequency offsets must be distinct, got {list(offsets)}")
    top = max(scales)
    tiles = []
    for s in sorted(set(scales), reverse=True):
        freqs = tuple(ShiftedDyadicInterval(-s, c, 0) for c in offsets)
        for position in range(2 ** (top - s)):
            if len(tiles) >= max_tiles:
                break
            tiles.append(VectorTile(ShiftedDyadicInterval(s, position, 0), freqs))
    return TileCollection(tuple(tiles), C)


@dataclass
class WavePacket:
    tile: Tile
    smoothness: int
    function: GridFunction
    shift: float = 0.0

    @property
    def center(self) -> float:
        return float(self.tile.time.center) + self.shift

    def decay_constant(self, m: float) -> float:
        """max_x |Phi(x)| |I|^(1/2) (1 + dist(x, c_I)/|I|)^m with periodic distance."""
        f = self.function
        length = float(self.tile.time.length)
        offset = np.abs(np.mod(f.x - self.center + f.period / 2, f.period) - f.period / 2)
        weight = (1 + offset / length) ** m
        return float(np.max(np.abs(f.samples) * math.sqrt(length) * weight))


def host_grid_for(tiles: Sequence[Tile], N_min: int = 8) -> tuple[int, float]:
    """Smallest host (N, L) on which every tile resolves."""
    lengths = [float(t.time.length) for t in tiles]
    L = max(8 * max(lengths), max(float(t.time.right) for t in tiles))
    L = 2.0 ** math.ceil(math.log2(L))
    top_frequency = max(max(abs(float(t.freq.left)), abs(float(t.freq.right))) for t in tiles)
    N = max(N_min, MIN_CELLS * L / min(lengths), 2 * L * top_frequency + 2)
    return 2 ** math.ceil(math.log2(N)), L


def make_wave_packet(
    tile: Tile, s: int, N: int, L: float, *, shift: float = 0.0
) -> WavePacket:
    """L^2-normalized packet with spectrum in 9/10 omega centered at c_I + shift.

    Raises:
        ResolutionError: If |I| spans fewer than 8 cells, exceeds L/8, or
            9/10 omega leaves the grid band
    """
    length = float(tile.time.length)
    if length < MIN_CELLS * L / N:
        raise ResolutionError(
            f"|I| = {length} spans fewer than {MIN_CELLS} cells of L/N = {L / N}"
        )
    if length > L / 8:
        raise ResolutionError(f"|I| = {length} exceeds L/8 = {L / 8}")
    bump = Bump1D.adapted(tile.freq.left, tile.freq.right, PACKET_SUPPORT, None, s)
    low, high = bump.support
    if low < -N / (2 * L) or high >= N / (2 * L):
        raise ResolutionError(
            f"Frequency window [{low}, {high}] leaves the grid band +-{N / (2 * L)}"
        )
    k = np.arange(-N // 2, N // 2)
    xi = k / L
    center = float(tile.time.center) + shift
    coefficients = bump(xi) * np.exp(-2j * np.pi * xi * center)
    packet = idft(Spectrum(coefficients, L))
    norm = math.sqrt(float(np.sum(np.abs(packet.samples) ** 2)) * L / N)
    if norm == 0:
        raise ResolutionError(f"No grid frequency inside 9/10 omega for {tile}")
    return WavePacket(tile, s, packet * (1 / norm), shift)


def _check_collections(G: RootedTree, collections: Mapping[int, TileCollection]) -> None:
    for u in G.internal_vertices:
        coll = collections.get(u.index)
        if coll is None or not coll.tiles:
            continue
        if coll.dim != len(u.children) + 1:
            raise ContractError(
                f"Vertex {u.index} has {len(u.children)} sons but its collection has dimension "
                f"{coll.dim}"
            )


@dataclass
class _ModelContext:
    G: RootedTree
    collections: Mapping[int, TileCollection]
    fs: Sequence[GridFunction]
    smoothness: int
    shifts: Sequence[float]
    scale_gap: int
    packets: dict = field(default_factory=dict)
    memo: dict = field(default_factory=dict)

    def packet(self, tile: Tile, shift: float) -> GridFunction:
        key = (tile, shift)
        if key not in self.packets:
            f = self.fs[0]
            packet = make_wave_packet(tile, self.smoothness, f.N, f.period, shift=shift)
            self.packets[key] = packet.function
        return self.packets[key]


def _vertex_output(ctx: _ModelContext, u: int, threshold: Fraction | None, a: int) -> GridFunction:
    key = (u, threshold, a)
    if key in ctx.memo:
        return ctx.memo[key]
    node = ctx.G.node(u)
    f0 = ctx.fs[0]
    if node.is_leaf:
        return ctx.fs[node.label - 1]
    out = GridFunction.zeros(f0.N, f0.period)
    coll = ctx.collections.get(u)
    if coll is None or not coll.tiles:
        ctx.memo[key] = out
        return out
    sons = ctx.G.sons(u)
    arity = len(sons)
    samples = np.zeros(f0.N, dtype=np.complex128)
    for P in coll.tiles:
        if threshold is not None and P.time.length < threshold:
            continue
        shift = ctx.shifts[a] * float(P.time.length)
        inner_threshold = P.time.length * 2**ctx.scale_gap
        weight = float(P.time.length) ** (-(arity - 1) / 2)
        for i, son in enumerate(sons):
            if son.is_leaf:
                inner = ctx.fs[son.label - 1]
            else:
                inner = _vertex_output(ctx, son.index, inner_threshold, a)
            weight *= inner.inner(ctx.packet(P.tiles[i], shift))
            if weight == 0:
                break
        if weight != 0:
            samples += weight * ctx.packet(P.tiles[arity], shift).samples
    out = f0.with_samples(samples)
    ctx.memo[key] = out
    return out


def model_apply(
    G: RootedTree,
    collections: Mapping[int, TileCollection],
    fs: Sequence[GridFunction],
    alpha_samples: int = 1,
    *,
    smoothness: int = 6,
    scale_gap: int = 4,
    min_length: float | Fraction | None = None,
) -> GridFunction:
    """Evaluate the discrete model operator T^G on a host grid.

    ``collections`` maps each internal vertex index of G to a collection of
    dimension (#sons + 1). Inner vertices only sum tiles whose time
    interval is at least 2^scale_gap times that of the enclosing tile. The
    average over translations uses ``alpha_samples`` equispaced shifts.
    ``min_length`` gives the truncated operator T^G_{|I|}: the root only sums
    tiles with |I_P| >= min_length, and T^G_{|I|} reaches T^G once |I| is below
    the finest root tile.

    Raises:
        ContractError: On arity/dimension mismatch, a wrong number of inputs or
            a non-positive ``min_length``
    """
    if len(fs) != G.n:
        raise ContractError(f"Tree with {G.n} leaves applied to {len(fs)} functions")
    for f in fs[1:]:
        fs[0].require_same_grid(f)
    if alpha_samples < 1:
        raise ContractError(f"alpha_samples must be positive, got {alpha_samples}")
    threshold = None if min_length is None else Fraction(min_length)
    if threshold is not None and threshold <= 0:
        raise ContractError(f"min_length must be positive, got {min_length}")
    _check_collections(G, collections)
    if not G.internal_vertices:
        return fs[0]
    shifts = [a / alpha_samples for a in range(alpha_samples)]
    ctx = _ModelContext(G, collections, fs, smoothness, shifts, scale_gap)
    total = np.zeros(fs[0].N, dtype=np.complex128)
    for a in range(alpha_samples):
        total += _vertex_output(ctx, G.root.index, threshold, a).samples
    logger.debug("model_apply used %d packets", len(ctx.packets))
    return fs[0].with_samples(total / alpha_samples)


def model_form(
    G: RootedTree,
    collections: Mapping[int, TileCollection],
    fs: Sequence[GridFunction],
    f_last: GridFunction,
    alpha_samples: int = 1,
    **kwargs,
) -> complex:
    """<T^G(f_1..f_n), f_last> = sum T * conj(f_last) * L/N."""
    out = model_apply(G, collections, fs, alpha_samples, **kwargs)
    out.require_same_grid(f_last)
    return out.inner(f_last)
