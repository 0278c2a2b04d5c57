# src/simplex_lab/tools/symbol_factory.py
"""Evaluable multiplier symbols built from bumps on shifted dyadic cubes.

The building block is a partition of unity of the open half-plane
a1*x1 < a2*x2 by products of bumps over the quasi-cubes whose distance to
the line a1*x1 = a2*x2 is between c_dist and band*c_dist diameters. Its
mass at each point is recorded per dyadic scale (a ScaleProfile), which is
what the higher symbols combine:

- m_a multiplies the profiles of all consecutive pairs and keeps only
  scale tuples within a window W of each other;
- m_G runs that construction at every internal vertex of a tree and forces
  the scales of inner vertices to lie G_uv levels below their parent.

With ``trunc=None`` each cube function is evaluated exactly and the
half-plane partition sums to one on the open half-plane. An integer
``trunc`` replaces every cube function by its Fourier series on the cube,
truncated at |n|_inf <= trunc, with the discarded coefficient mass recorded.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from simplex_lab.errors import ContractError, CoverageError, SizeGuardError
from simplex_lab.tools.dyadic_geometry import RegionParams
from simplex_lab.tools.simplex_trees import (
    RootedTree,
    coverage_report,
    enumerate_trees,
    membership_from_gaps,
    merge_candidate,
    sample_log_gaps,
)

logger = logging.getLogger(__name__)

MAX_SYMBOL_LEAVES = 6
MAX_PRODUCT_LEAVES = 5
SUPPORT_FRACTION = 0.8
PLATEAU_FRACTION = 0.7
CUTOFF_SUPPORT = 0.9
ALPHA_PAIRS = [(a1, a2) for a1 in range(3) for a2 in range(3)]


def smoothstep(t: np.ndarray, order: int = 6) -> np.ndarray:
    """Polynomial step from 0 to 1 on [0, 1] with ``order`` vanishing derivatives at both ends."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    total = np.zeros_like(t)
    for i in range(order + 1):
        total += comb(order + i, i) * (1 - t) ** i
    return t ** (order + 1) * total


@dataclass(frozen=True)
class Bump1D:
    """Symmetric bump: 1 within ``plateau`` of the center, 0 beyond ``radius``."""

    center: float
    radius: float
    plateau: float = 0.0
    order: int = 6
    interval: tuple[float, float] | None = None
    support_fraction: float | None = None

    def __post_init__(self):
        if not 0 <= self.plateau < self.radius:
            raise ContractError(
                f"Bump needs 0 <= plateau < radius, got plateau={self.plateau}, "
                f"radius={self.radius}"
            )
        if self.order < 1:
            raise ContractError(f"Bump order must be positive, got {self.order}")

    @classmethod
    def adapted(
        cls,
        lo: float | Fraction,
        hi: float | Fraction,
        support_fraction: float | Fraction = SUPPORT_FRACTION,
        plateau_fraction: float | Fraction | None = None,
        order: int = 6,
    ) -> Bump1D:
        """Bump supported in support_fraction*[lo, hi], equal to 1 on plateau_fraction*[lo, hi]."""
        lo, hi = float(lo), float(hi)
        length = hi - lo
        return cls(
            center=(lo + hi) / 2,
            radius=float(support_fraction) * length / 2,
            plateau=0.0 if plateau_fraction is None else float(plateau_fraction) * length / 2,
            order=order,
            interval=(lo, hi),
            support_fraction=float(support_fraction),
        )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        distance = np.abs(np.asarray(x, dtype=float) - self.center)
        return smoothstep((self.radius - distance) / (self.radius - self.plateau), self.order)

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.radius, self.center + self.radius

    def describe(self) -> dict:
        return {
            "center": self.center,
            "radius": self.radius,
            "plateau": self.plateau,
            "order": self.order,
        }


def _bump_on(x: np.ndarray, lo: np.ndarray, size: np.ndarray, support, plateau, order=6):
    """Vectorized bump adapted to support*[lo, lo+size) with plateau*[lo, lo+size)."""
    distance = np.abs(x - (lo + size / 2))
    radius = support * size / 2
    flat = plateau * size / 2
    return smoothstep((radius - distance) / (radius - flat), order)


@dataclass
class ScaleProfile:
    """Mass of a symbol split by dyadic scale: row t holds scale base + t."""

    base: np.ndarray
    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    def total(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def cumulative_at(self, scale: np.ndarray) -> np.ndarray:
        """Sum of the rows with scale <= ``scale`` (per point)."""
        cumulative = np.cumsum(self.values, axis=0)
        index = scale - self.base
        below = index < 0
        index = np.clip(index, 0, self.rows - 1)
        picked = np.take_along_axis(cumulative, index[None, :], axis=0)[0]
        return np.where(below, 0.0, picked)


def align_profiles(profiles: Sequence[ScaleProfile], cap: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack profiles on a common per-point base.

    Offsets above ``cap`` are treated as infinitely far, which drops the
    corresponding mass; callers pick ``cap`` beyond any window they query.
    """
    base = np.min(np.stack([p.base for p in profiles]), axis=0)
    rows = max(p.rows for p in profiles) + cap
    points = base.size
    out = np.zeros((len(profiles), rows, points))
    columns = np.arange(points)
    for i, profile in enumerate(profiles):
        offset = profile.base - base
        far = offset > cap
        for t in range(profile.rows):
            target = t + offset
            keep = ~far & (target < rows)
            out[i, target[keep], columns[keep]] = profile.values[t, keep]
    return base, out


class HalfPlanePartition:
    """Partition of unity of the open half-plane a1*x1 < a2*x2 by cube bumps."""

    def __init__(self, a1: float, a2: float, rp: RegionParams, trunc: int | None = None):
        if not (a1 > 0 and a2 > 0):
            raise ContractError(f"Half-plane coefficients must be positive, got ({a1}, {a2})")
        if trunc is not None and trunc < 0:
            raise ContractError(f"Truncation order must be non-negative, got {trunc}")
        self.a1, self.a2 = float(a1), float(a2)
        self.norm = math.hypot(self.a1, self.a2)
        self.rp = rp
        self.trunc = trunc
        c, b = rp.c_dist, rp.band
        self.offsets = np.arange(
            math.floor(-math.log2(math.sqrt(2) * b * c)) - 2,
            math.ceil(-math.log2(math.sqrt(2) * c)) + 3,
        )
        self._coefficients: dict[tuple, np.ndarray] = {}
        self.tail_bounds: dict[tuple, float] = {}

    @property
    def log_width(self) -> float:
        """log2 of the ratio between the largest and smallest contributing scale."""
        return math.log2(self.rp.band + 1 / self.rp.c_dist)

    def _candidates(self, x1: np.ndarray, x2: np.ndarray, support: float):
        """Yield (row, alpha pair, j, k1, k2, lo1, lo2, size, member, weight) per candidate."""
        delta = (self.a2 * x2 - self.a1 * x1) / self.norm
        positive = delta > 0
        j0 = np.zeros(x1.shape, dtype=np.int64)
        j0[positive] = np.floor(np.log2(delta[positive])).astype(np.int64)
        c, b = self.rp.c_dist, self.rp.band
        for row, t in enumerate(self.offsets):
            j = j0 + t
            size = np.ldexp(1.0, j)
            sigma = np.where(j % 2 == 0, 1.0, -1.0)
            for alpha in ALPHA_PAIRS:
                shift1, shift2 = sigma * alpha[0] / 3, sigma * alpha[1] / 3
                k1 = np.floor(x1 / size - shift1)
                k2 = np.floor(x2 / size - shift2)
                lo1, lo2 = size * (k1 + shift1), size * (k2 + shift2)
                gap = self.a2 * lo2 - self.a1 * (lo1 + size)
                ratio = gap / (self.norm * math.sqrt(2) * size)
                member = positive & (gap > 0) & (ratio >= c) & (ratio <= b * c)
                weight = np.where(
                    member,
                    _bump_on(x1, lo1, size, support, PLATEAU_FRACTION)
                    * _bump_on(x2, lo2, size, support, PLATEAU_FRACTION),
                    0.0,
                )
                yield row, alpha, j, k1, k2, lo1, lo2, size, member, weight

    def _exact_parts(self, x1, x2):
        rows = len(self.offsets)
        weights = np.zeros((rows, x1.size))
        for row, *_, weight in self._candidates(x1, x2, SUPPORT_FRACTION):
            weights[row] += weight
        return weights

    def profile(self, x1: np.ndarray, x2: np.ndarray) -> ScaleProfile:
        """Per-scale mass of the partition at the points (x1, x2)."""
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        delta = (self.a2 * x2 - self.a1 * x1) / self.norm
        base = np.zeros(x1.shape, dtype=np.int64)
        positive = delta > 0
        base[positive] = np.floor(np.log2(delta[positive])).astype(np.int64) + self.offsets[0]
        weights = self._exact_parts(x1, x2)
        total = weights.sum(axis=0)
        if np.any(positive & (total <= 0)):
            logger.debug("Half-plane partition has empty cover at %d points", np.sum(total <= 0))
        if self.trunc is None:
            values = np.divide(weights, total, out=np.zeros_like(weights), where=total > 0)
        else:
            values = self._truncated_values(x1, x2)
        return ScaleProfile(base, values)

    def _cube_coefficients(self, key: tuple) -> np.ndarray:
        if key in self._coefficients:
            return self._coefficients[key]
        j, k1, a1, k2, a2 = key
        size = math.ldexp(1.0, j)
        sigma = 1 if j % 2 == 0 else -1
        lo1, lo2 = size * (k1 + sigma * a1 / 3), size * (k2 + sigma * a2 / 3)
        M = 64
        while M < 4 * (self.trunc + 1):
            M *= 2
        grid = (np.arange(M) + 0.5) / M * size
        g1, g2 = np.meshgrid(lo1 + grid, lo2 + grid, indexing="ij")
        g1, g2 = g1.ravel(), g2.ravel()
        mine = np.zeros(g1.size)
        total = np.zeros(g1.size)
        for _, alpha, jj, kk1, kk2, *_, weight in self._candidates(g1, g2, SUPPORT_FRACTION):
            total += weight
            match = (jj == j) & (kk1 == k1) & (kk2 == k2) & (alpha == (a1, a2))
            mine += np.where(match, weight, 0.0)
        values = np.divide(mine, total, out=np.zeros_like(mine), where=total > 0).reshape(M, M)
        # half-cell sampling offset folded into the coefficients
        n = np.fft.fftfreq(M, 1.0 / M)
        phase = np.exp(-1j * np.pi * n / M)
        spectrum = np.fft.fft2(values) / (M * M) * phase[:, None] * phase[None, :]
        spectrum = np.fft.fftshift(spectrum)
        centre = M // 2
        kept = spectrum[
            centre - self.trunc : centre + self.trunc + 1,
            centre - self.trunc : centre + self.trunc + 1,
        ]
        self.tail_bounds[key] = float(np.abs(spectrum).sum() - np.abs(kept).sum())
        self._coefficients[key] = kept
        return kept

    def _truncated_values(self, x1, x2):
        rows = len(self.offsets)
        values = np.zeros((rows, x1.size))
        n = np.arange(-self.trunc, self.trunc + 1)
        for row, alpha, j, k1, k2, lo1, lo2, size, member, _ in self._candidates(
            x1, x2, CUTOFF_SUPPORT
        ):
            cutoff = _bump_on(x1, lo1, size, CUTOFF_SUPPORT, SUPPORT_FRACTION) * _bump_on(
                x2, lo2, size, CUTOFF_SUPPORT, SUPPORT_FRACTION
            )
            for p in np.flatnonzero(member & (cutoff > 0)):
                key = (int(j[p]), int(k1[p]), alpha[0], int(k2[p]), alpha[1])
                coefficients = self._cube_coefficients(key)
                e1 = np.exp(2j * np.pi * n * (x1[p] - lo1[p]) / size[p])
                e2 = np.exp(2j * np.pi * n * (x2[p] - lo2[p]) / size[p])
                values[row, p] += cutoff[p] * float(np.real(e1 @ coefficients @ e2))
        return values

    @property
    def tail_bound(self) -> float:
        return max(self.tail_bounds.values(), default=0.0)


class SymbolExpr(ABC):
    """Node of an evaluable symbol; ``arity`` is the number of frequency variables."""

    arity: int

    def __call__(self, xi: np.ndarray, cache: dict | None = None) -> np.ndarray:
        if cache is not None and id(self) in cache:
            return cache[id(self)]
        value = self._evaluate(xi, cache)
        if cache is not None:
            cache[id(self)] = value
        return value

    @abstractmethod
    def _evaluate(self, xi: np.ndarray, cache: dict | None) -> np.ndarray: ...

    @abstractmethod
    def describe(self) -> dict: ...


def _points(xi: np.ndarray, arity: int) -> np.ndarray:
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[-1] != arity:
        raise ContractError(f"Symbol takes {arity} frequencies, got {xi.shape[-1]}")
    return xi


def evaluate(node: SymbolExpr, xi: np.ndarray) -> np.ndarray:
    """Evaluate a symbol at points of shape (M, arity) or a single point."""
    return node(_points(xi, node.arity), {})


def sample_rows(node: SymbolExpr, xi: np.ndarray) -> list[dict]:
    xi = _points(xi, node.arity)
    values = evaluate(node, xi)
    return [
        {**{f"xi_{i + 1}": float(v) for i, v in enumerate(point)}, "value": float(value)}
        for point, value in zip(xi, np.real_if_close(values))
    ]


@dataclass(eq=False)
class Constant(SymbolExpr):
    value: float
    arity: int

    def _evaluate(self, xi, cache):
        return np.full(xi.shape[0], self.value, dtype=float)

    def describe(self):
        return {"kind": "constant", "value": self.value}


@dataclass(eq=False)
class SimplexIndicator(SymbolExpr):
    """Exact indicator of xi_1 < ... < xi_n."""

    arity: int

    def _evaluate(self, xi, cache):
        return np.all(np.diff(xi, axis=1) > 0, axis=1).astype(float)

    def describe(self):
        return {"kind": "simplex_indicator", "n": self.arity}


def _indicator_vector(coefficients: Sequence[int], arity: int) -> np.ndarray:
    vector = np.asarray(coefficients, dtype=float)
    if vector.shape != (arity,) or not np.all(np.isin(vector, (0.0, 1.0))) or not vector.any():
        raise ContractError(f"Linear form {list(coefficients)} is not a block indicator")
    nonzero = np.flatnonzero(vector)
    if nonzero[-1] - nonzero[0] + 1 != nonzero.size:
        raise ContractError(f"Linear form {list(coefficients)} is not contiguous")
    return vector


@dataclass(eq=False)
class BumpOnLinearForm(SymbolExpr):
    """phi(sum of xi_l over a contiguous block)."""

    bump: Bump1D
    coefficients: tuple[int, ...]

    def __post_init__(self):
        self.arity = len(self.coefficients)
        self._vector = _indicator_vector(self.coefficients, self.arity)

    def _evaluate(self, xi, cache):
        return self.bump(xi @ self._vector)

    def describe(self):
        return {"kind": "bump", "form": list(self.coefficients), "bump": self.bump.describe()}


@dataclass(eq=False)
class ModulatedBump(SymbolExpr):
    """phi(s) * exp(2 pi i n (s - origin) / length) with s a block sum."""

    bump: Bump1D
    coefficients: tuple[int, ...]
    frequency: int
    origin: float
    length: float

    def __post_init__(self):
        self.arity = len(self.coefficients)
        self._vector = _indicator_vector(self.coefficients, self.arity)

    def _evaluate(self, xi, cache):
        s = xi @ self._vector
        return self.bump(s) * np.exp(2j * np.pi * self.frequency * (s - self.origin) / self.length)

    def describe(self):
        return {
            "kind": "modulated_bump",
            "form": list(self.coefficients),
            "frequency": self.frequency,
            "bump": self.bump.describe(),
        }


@dataclass(eq=False)
class Product(SymbolExpr):
    factors: list[SymbolExpr]

    def __post_init__(self):
        arities = {f.arity for f in self.factors}
        if len(arities) != 1:
            raise ContractError(f"Product factors have arities {sorted(arities)}")
        self.arity = arities.pop()

    def _evaluate(self, xi, cache):
        value = self.factors[0](xi, cache)
        for factor in self.factors[1:]:
            value = value * factor(xi, cache)
        return value

    def describe(self):
        return {"kind": "product", "factors": [f.describe() for f in self.factors]}


@dataclass(eq=False)
class WeightedSum(SymbolExpr):
    terms: list[tuple[complex, SymbolExpr]]

    def __post_init__(self):
        arities = {node.arity for _, node in self.terms}
        if len(arities) != 1:
            raise ContractError(f"Summands have arities {sorted(arities)}")
        self.arity = arities.pop()

    def _evaluate(self, xi, cache):
        total = np.zeros(xi.shape[0], dtype=complex)
        for weight, node in self.terms:
            total = total + weight * node(xi, cache)
        return np.real_if_close(total, tol=1000)

    def describe(self):
        return {
            "kind": "weighted_sum",
            "terms": len(self.terms),
            "first": [node.describe() for _, node in self.terms[:3]],
        }


def _window_sums(prefix: np.ndarray, start: int, length: int) -> np.ndarray:
    rows = prefix.shape[0] - 1
    lo = min(max(start, 0), rows)
    hi = min(max(start + length, 0), rows)
    return prefix[hi] - prefix[lo]


@dataclass(eq=False)
class AvecSymbol(SymbolExpr):
    """Product of consecutive half-plane partitions restricted to comparable scales."""

    a: tuple[float, ...]
    rp: RegionParams
    trunc: int | None = None
    forms: tuple[tuple[int, ...], ...] | None = None
    comparability: float | None = None

    def __post_init__(self):
        if len(self.a) < 2 or any(not v > 0 for v in self.a):
            raise ContractError(f"Need at least two positive coefficients, got {self.a}")
        d = len(self.a)
        if self.forms is None:
            self.forms = tuple(tuple(int(i == l) for l in range(d)) for i in range(d))
        self.arity = len(self.forms[0])
        self._vectors = [_indicator_vector(f, self.arity) for f in self.forms]
        self.pairs = [
            HalfPlanePartition(self.a[i], self.a[i + 1], self.rp, self.trunc)
            for i in range(d - 1)
        ]
        norms = [math.hypot(self.a[i], self.a[i + 1]) for i in range(d - 1)]
        c_eff = self.comparability or (
            self.rp.c_comp * (1 + (d - 2) * self.rp.c_comp / self.rp.c_sep)
        )
        width = self.pairs[0].log_width
        self.window = max(
            0, math.ceil(math.log2(c_eff) + math.log2(max(norms) / min(norms)) + width - 1e-12)
        )
        self.derived_c_comp = (
            (self.rp.band + 1 / self.rp.c_dist) * 2.0**self.window * max(norms) / min(norms)
        )

    def profile(self, xi: np.ndarray) -> ScaleProfile:
        """Mass split by the scale of the first pair."""
        sums = [xi @ v for v in self._vectors]
        pair_profiles = [
            pair.profile(sums[i], sums[i + 1]) for i, pair in enumerate(self.pairs)
        ]
        if len(pair_profiles) == 1:
            return pair_profiles[0]
        W = self.window
        cap = W + 2 * max(p.rows for p in pair_profiles)
        base, stack = align_profiles(pair_profiles, cap)
        rows = stack.shape[1]
        prefix = np.concatenate([np.zeros((stack.shape[0], 1, base.size)), stack.cumsum(axis=1)], 1)
        values = np.zeros((rows, base.size))
        for k in range(rows):
            if not np.any(stack[0, k]):
                continue
            wide = np.zeros(base.size)
            for w in range(k - W, k + 1):
                term = np.ones(base.size)
                for i in range(1, stack.shape[0]):
                    term *= _window_sums(prefix[i], w, W + 1)
                wide += term
            narrow = np.zeros(base.size)
            for w in range(k - W, k):
                term = np.ones(base.size)
                for i in range(1, stack.shape[0]):
                    term *= _window_sums(prefix[i], w + 1, W)
                narrow += term
            values[k] = stack[0, k] * (wide - narrow)
        return ScaleProfile(base, values)

    def _evaluate(self, xi, cache):
        return self.profile(xi).total()

    @property
    def tail_bound(self) -> float:
        return sum(pair.tail_bound for pair in self.pairs)

    def describe(self):
        return {
            "kind": "m_avec",
            "a": list(self.a),
            "forms": [list(f) for f in self.forms],
            "window": self.window,
            "derived_c_comp": self.derived_c_comp,
            "region": self.rp.model_dump(),
            "trunc": self.trunc,
            "tail_bound": self.tail_bound,
        }


def halfplane_symbol(
    a1: float, a2: float, rp: RegionParams | None = None, trunc: int | None = None
) -> AvecSymbol:
    """Symbol of the half-plane a1*x1 < a2*x2 as a two-variable expression."""
    return AvecSymbol((a1, a2), rp or RegionParams(), trunc)


def make_m_avec(
    a: Sequence[float], rp: RegionParams | None = None, trunc: int | None = None
) -> AvecSymbol:
    """Symbol equal to one on the region where a_1 x_1 < ... < a_d x_d with comparable gaps."""
    return AvecSymbol(tuple(float(v) for v in a), rp or RegionParams(), trunc)


@dataclass(eq=False)
class TreeSymbol(SymbolExpr):
    """m_G: the vertex symbols of G nested with inter-level scale gaps."""

    tree: RootedTree
    rp: RegionParams
    trunc: int | None = None

    def __post_init__(self):
        n = self.tree.n
        if n > MAX_SYMBOL_LEAVES:
            raise SizeGuardError(f"Tree symbols are limited to n <= {MAX_SYMBOL_LEAVES}, got {n}")
        self.arity = n
        self.vertex_symbols: dict[int, AvecSymbol] = {}
        self.scale_gaps: dict[tuple[int, int], int] = {}
        for u in self.tree.internal_vertices:
            sons = self.tree.sons(u)
            forms = tuple(
                tuple(int(son.lo <= l + 1 <= son.hi) for l in range(n)) for son in sons
            )
            a = tuple(1.0 / (son.hi - son.lo + 1) for son in sons)
            size = u.hi - u.lo + 1
            c_eff = self.rp.c_comp * (1 + (size - 2) * self.rp.c_comp / self.rp.c_sep)
            self.vertex_symbols[u.index] = AvecSymbol(a, self.rp, self.trunc, forms, c_eff)
        for u in self.tree.internal_vertices:
            outer = self.vertex_symbols[u.index]
            for v in self.tree.sons(u):
                if v.is_leaf:
                    continue
                inner = self.vertex_symbols[v.index]
                gap = (
                    math.log2(self.rp.c_sep / (v.hi - v.lo))
                    + math.log2(math.hypot(*inner.a[:2]) / math.hypot(*outer.a[:2]))
                    - outer.pairs[0].log_width
                )
                self.scale_gaps[u.index, v.index] = math.floor(gap)

    def profile(self, xi: np.ndarray, u: int = 0) -> ScaleProfile:
        own = self.vertex_symbols[u].profile(xi)
        values = own.values.copy()
        for v in self.tree.sons(u):
            if v.is_leaf:
                continue
            inner = self.profile(xi, v.index)
            gap = self.scale_gaps[u, v.index]
            for row in range(own.rows):
                values[row] *= inner.cumulative_at(own.base + row - gap)
        return ScaleProfile(own.base, values)

    def _evaluate(self, xi, cache):
        if not self.tree.internal_vertices:
            return np.ones(xi.shape[0])
        return self.profile(xi).total()

    @property
    def tail_bound(self) -> float:
        return sum(s.tail_bound for s in self.vertex_symbols.values())

    def describe(self):
        return {
            "kind": "m_G",
            "tree": str(self.tree),
            "region": self.rp.model_dump(),
            "trunc": self.trunc,
            "scale_gaps": {f"{u}->{v}": g for (u, v), g in self.scale_gaps.items()},
            "windows": {str(u): s.window for u, s in self.vertex_symbols.items()},
            "nonpositive_gaps": [f"{u}->{v}" for (u, v), g in self.scale_gaps.items() if g <= 0],
            "tail_bound": self.tail_bound,
        }


def make_m_G(G: RootedTree, rp: RegionParams | None = None, trunc: int | None = None) -> TreeSymbol:
    """Tree symbol equal to one on R_G and supported in a region of the same type."""
    return TreeSymbol(G, rp or RegionParams(), trunc)


@dataclass(frozen=True)
class Envelope:
    """Measured constants of the smallest region of a given type holding a support."""

    c_sep: float
    c_comp: float
    support_points: int


def _vertex_ratios(G: RootedTree, gaps: np.ndarray):
    seps, comps = [], []
    for u in G.internal_vertices:
        cut_idx = [c - 1 for c in G.cuts(u)]
        other = [g - 1 for g in range(u.lo, u.hi) if g not in G.cuts(u)]
        cut = gaps[:, cut_idx]
        comps.append(cut.max(axis=1) / cut.min(axis=1))
        if other:
            seps.append(cut.min(axis=1) / gaps[:, other].max(axis=1))
    return seps, comps


def measure_envelope(
    symbol: SymbolExpr, G: RootedTree, xi: np.ndarray, tol: float = 1e-12
) -> Envelope:
    """Tightest (c_sep, c_comp) for which R_G contains every sampled support point."""
    xi = _points(xi, G.n)
    values = np.abs(evaluate(symbol, xi))
    support = xi[values > tol]
    if support.shape[0] == 0 or G.n < 2:
        return Envelope(math.inf, 1.0, int(support.shape[0]))
    gaps = np.diff(support, axis=1)
    seps, comps = _vertex_ratios(G, gaps)
    # one-ulp slack so the support points themselves test as members
    c_sep = float(np.min([s.min() for s in seps])) * (1 - 1e-12) if seps else math.inf
    c_comp = float(np.max([c.max() for c in comps])) * (1 + 1e-12) if comps else 1.0
    return Envelope(c_sep, c_comp, int(support.shape[0]))


@dataclass
class FixingExpansion:
    """Truncated multiple Fourier series of prod phi_j(x_j) * Phi(x_1 + ... + x_d)."""

    coefficients: np.ndarray
    intervals: list[tuple[float, float]]
    cutoffs: list[Bump1D]
    trunc: int
    target: callable = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.intervals)

    def _factors(self, x: np.ndarray) -> list[np.ndarray]:
        n = np.arange(-self.trunc, self.trunc + 1)
        factors = []
        for axis, ((lo, hi), cutoff) in enumerate(zip(self.intervals, self.cutoffs)):
            phase = np.exp(2j * np.pi * np.outer(x[:, axis] - lo, n) / (hi - lo))
            factors.append(cutoff(x[:, axis])[:, None] * phase)
        return factors

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        letters = "abcd"[: self.dim]
        spec = ",".join(f"m{c}" for c in letters) + f",{letters}->m"
        value = np.einsum(spec, *self._factors(x), self.coefficients)
        return np.real_if_close(value, tol=1e6)

    def residual(self, points_per_axis: int = 64) -> float:
        """Max |target - expansion| on a uniform grid of the cube."""
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in self.intervals]
        mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        return float(np.max(np.abs(self.target(mesh) - self.evaluate(mesh))))

    def shell(self, radius: int) -> float:
        """Largest |C_n| with |n|_inf == radius."""
        index = np.indices(self.coefficients.shape) - self.trunc
        norm = np.max(np.abs(index), axis=0)
        selected = np.abs(self.coefficients)[norm == radius]
        return float(selected.max()) if selected.size else 0.0

    def as_symbol(self) -> WeightedSum:
        d = self.dim
        terms = []
        for index in np.ndindex(self.coefficients.shape):
            weight = complex(self.coefficients[index])
            if weight == 0:
                continue
            factors = [
                ModulatedBump(
                    self.cutoffs[axis],
                    tuple(int(l == axis) for l in range(d)),
                    index[axis] - self.trunc,
                    self.intervals[axis][0],
                    self.intervals[axis][1] - self.intervals[axis][0],
                )
                for axis in range(d)
            ]
            terms.append((weight, Product(factors)))
        return WeightedSum(terms)


def fixing_expand(
    bumps: Sequence[Bump1D],
    outer: Bump1D,
    trunc: int,
    beta: float = 0.9,
) -> FixingExpansion:
    """Separate the variables of prod phi_j(x_j) * Phi(sum x_j) by a Fourier series.

    Each input bump must carry its interval Q_j and a support fraction alpha_j
    below ``beta``; the cutoff on axis j is 1 on alpha_j*Q_j and vanishes
    outside beta*Q_j.

    Raises:
        ContractError: If a bump lacks its interval or alpha_j >= beta
    """
    if trunc < 0:
        raise ContractError(f"Truncation order must be non-negative, got {trunc}")
    if not 1 <= len(bumps) <= 4:
        raise ContractError(f"Fixing expansion supports 1..4 factors, got {len(bumps)}")
    intervals, cutoffs = [], []
    for bump in bumps:
        if bump.interval is None or bump.support_fraction is None:
            raise ContractError("Fixing expansion needs bumps built with Bump1D.adapted")
        if bump.support_fraction >= beta:
            raise ContractError(
                f"Support fraction {bump.support_fraction} must be below beta={beta}"
            )
        lo, hi = bump.interval
        intervals.append((lo, hi))
        cutoffs.append(Bump1D.adapted(lo, hi, beta, bump.support_fraction, bump.order))

    def target(x: np.ndarray) -> np.ndarray:
        value = outer(x.sum(axis=1))
        for axis, bump in enumerate(bumps):
            value = value * bump(x[:, axis])
        return value

    low = sum(b.support[0] for b in bumps)
    high = sum(b.support[1] for b in bumps)
    d = len(bumps)
    if outer.center - outer.plateau <= low and high <= outer.center + outer.plateau:
        coefficients = np.zeros((2 * trunc + 1,) * d, dtype=complex)
        coefficients[(trunc,) * d] = 1.0
        plain = [Bump1D(b.center, b.radius, b.plateau, b.order, b.interval, b.support_fraction)
                 for b in bumps]
        return FixingExpansion(coefficients, intervals, plain, trunc, target)

    M = 64 if d <= 2 else 16
    while M < 4 * (trunc + 1):
        M *= 2
    axes = [lo + (hi - lo) * np.arange(M) / M for lo, hi in intervals]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    values = target(mesh).reshape((M,) * d)
    spectrum = np.fft.fftshift(np.fft.fftn(values)) / M**d
    centre = M // 2
    window = tuple(slice(centre - trunc, centre + trunc + 1) for _ in range(d))
    return FixingExpansion(spectrum[window], intervals, cutoffs, trunc, target)


@dataclass
class TelescopeDecomposition:
    trees: list[RootedTree]
    symbols: list[TreeSymbol]
    summands: list[SymbolExpr]
    remainders: list[SymbolExpr]

    def total(self, xi: np.ndarray) -> np.ndarray:
        xi = _points(xi, self.trees[0].n)
        cache: dict = {}
        return sum(np.real(s(xi, cache)) for s in self.summands)

    def identity_defect(self, xi: np.ndarray) -> float:
        """Max deviation between stored remainders and the recursion m^i = m^(i-1)(1 - m_Gi)."""
        xi = _points(xi, self.trees[0].n)
        cache: dict = {}
        worst = 0.0
        for i, symbol in enumerate(self.symbols, start=1):
            previous = self.remainders[i - 1](xi, cache)
            recursion = previous - previous * symbol(xi, cache)
            worst = max(worst, float(np.max(np.abs(self.remainders[i](xi, cache) - recursion))))
        total = self.total(xi)
        chi = self.remainders[0](xi, cache)
        worst = max(worst, float(np.max(np.abs(total - (chi - self.remainders[-1](xi, cache))))))
        return worst


def telescope(
    n: int,
    order: Sequence[int] | Sequence[RootedTree] | None = None,
    rp: RegionParams | None = None,
    trunc: int | None = None,
    *,
    coverage_samples: int = 20000,
    seed: int = 0,
    log_span: float = 8.0,
) -> TelescopeDecomposition:
    """Write the simplex indicator as m_G1 + m^1 m_G2 + ... + m^(N-1) m_GN.

    Raises:
        CoverageError: If sampled gap vectors fall outside every region R_G
    """
    rp = rp or RegionParams()
    report = coverage_report(n, rp, coverage_samples, seed, log_span=log_span)
    if report.uncovered_fraction > 0:
        raise CoverageError(
            f"Region constants {rp.model_dump()} leave {report.uncovered_fraction:.4%} of the "
            f"sampled simplex uncovered for n={n}",
            report.uncovered_points,
        )
    trees = enumerate_trees(n)
    if order is not None:
        trees = [t if isinstance(t, RootedTree) else trees[t] for t in order]
    chi = SimplexIndicator(n)
    symbols = [TreeSymbol(G, rp, trunc) for G in trees]
    remainders: list[SymbolExpr] = [chi]
    summands: list[SymbolExpr] = []
    for symbol in symbols:
        previous = remainders[-1]
        summand = Product([previous, symbol])
        summands.append(summand)
        remainders.append(WeightedSum([(1.0, previous), (-1.0, summand)]))
    return TelescopeDecomposition(trees, symbols, summands, remainders)


def sample_simplex(n: int, samples: int, seed: int = 0, log_span: float = 6.0) -> np.ndarray:
    """Points xi with xi_1 = 0 and log-uniform gaps."""
    gaps = sample_log_gaps(n, samples, seed, log_span)
    return np.concatenate([np.zeros((samples, 1)), np.cumsum(gaps, axis=1)], axis=1)


@dataclass
class ProductClosureReport:
    first: str
    second: str
    candidate: str
    samples: int
    support_points: int
    support_violations: int
    max_eval_mismatch: float
    envelope: Envelope
    scale_offsets: dict[int, int]


def product_closure_check(
    G1: RootedTree,
    G2: RootedTree,
    rp: RegionParams | None = None,
    trunc: int | None = None,
    samples: int = 10000,
    seed: int = 0,
    *,
    tol: float = 1e-9,
) -> ProductClosureReport:
    """Test numerically that m_G1 * m_G2 lives in a region of the predicted type."""
    if G1.n != G2.n:
        raise ContractError(f"Trees have {G1.n} and {G2.n} leaves")
    if G1.n > MAX_PRODUCT_LEAVES:
        raise SizeGuardError(f"Product checks are limited to n <= {MAX_PRODUCT_LEAVES}")
    rp = rp or RegionParams()
    candidate = merge_candidate(G1, G2)
    xi = sample_simplex(G1.n, samples, seed)
    m1 = TreeSymbol(G1, rp, trunc)
    m2 = TreeSymbol(G2, rp, trunc)
    mc = TreeSymbol(candidate, rp, trunc)
    product = evaluate(m1, xi) * evaluate(m2, xi)
    support = np.abs(product) > tol
    envelope = measure_envelope(mc, candidate, xi, tol)
    gaps = np.diff(xi, axis=1)
    inside = membership_from_gaps(candidate, gaps, envelope) if G1.n > 1 else np.ones(samples, bool)
    violations = int(np.sum(support & ~inside))
    mismatch = float(np.max(np.abs(product - product * evaluate(mc, xi)))) if samples else 0.0

    offsets: dict[int, int] = {}
    if G1.internal_vertices and G2.internal_vertices and support.any():
        p1, p2 = m1.profile(xi[support]), m2.profile(xi[support])
        for r1 in range(p1.rows):
            for r2 in range(p2.rows):
                alive = (p1.values[r1] > tol) & (p2.values[r2] > tol)
                for offset, count in zip(*np.unique(
                    (p1.base + r1 - p2.base - r2)[alive], return_counts=True
                )):
                    offsets[int(offset)] = offsets.get(int(offset), 0) + int(count)
    return ProductClosureReport(
        first=str(G1),
        second=str(G2),
        candidate=str(candidate),
        samples=samples,
        support_points=int(support.sum()),
        support_violations=violations,
        max_eval_mismatch=mismatch,
        envelope=envelope,
        scale_offsets=dict(sorted(offsets.items())),
    )
