# src/simplex_lab/tools/dyadic_geometry.py
"""Exact rational geometry of shifted dyadic intervals and quasi-cubes.

A shifted dyadic interval is 2^j * (k + [0, 1) + sigma_j * alpha) with
alpha in {0, 1/3, 2/3} and sigma_j = +1 for even j, -1 for odd j. All
endpoints are Fractions; every predicate in this module is decided exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from simplex_lab.errors import ContractError, GeometryError

Number = int | float | Fraction

SHRINK_COVER = Fraction(7, 10)
COVER_FACTOR = 8
SHRINK_BUMP = Fraction(8, 10)
SHRINK_FIXING = Fraction(9, 10)


def as_fraction(value: Number | str) -> Fraction:
    """Exact conversion; floats keep their binary value."""
    return value if isinstance(value, Fraction) else Fraction(value)


def parity_sign(j: int) -> int:
    return 1 if j % 2 == 0 else -1


@dataclass(frozen=True, order=True)
class ShiftedDyadicInterval:
    j: int
    k: int
    alpha_index: int = 0

    def __post_init__(self):
        if self.alpha_index not in (0, 1, 2):
            raise ContractError(f"alpha_index must be 0, 1 or 2, got {self.alpha_index}")

    @property
    def length(self) -> Fraction:
        return Fraction(2) ** self.j

    @property
    def left(self) -> Fraction:
        return self.length * Fraction(3 * self.k + parity_sign(self.j) * self.alpha_index, 3)

    @property
    def right(self) -> Fraction:
        return self.left + self.length

    @property
    def center(self) -> Fraction:
        return self.left + self.length / 2

    def endpoints(self) -> tuple[Fraction, Fraction]:
        return self.left, self.right

    def box(self) -> Box:
        return Box(((self.left, self.right),))

    def to_dict(self) -> dict:
        return {"j": self.j, "k": self.k, "alpha_index": self.alpha_index}

    @classmethod
    def from_dict(cls, data: dict) -> ShiftedDyadicInterval:
        return cls(int(data["j"]), int(data["k"]), int(data.get("alpha_index", 0)))


def endpoints(interval: ShiftedDyadicInterval) -> tuple[Fraction, Fraction]:
    return interval.endpoints()


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by exact (lo, hi) pairs per axis."""

    sides: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        sides = tuple((as_fraction(lo), as_fraction(hi)) for lo, hi in self.sides)
        if not sides:
            raise ContractError("A box needs at least one axis")
        for lo, hi in sides:
            if hi < lo:
                raise ContractError(f"Box side ({lo}, {hi}) has negative length")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def from_bounds(cls, bounds: Iterable[tuple[Number, Number]]) -> Box:
        return cls(tuple(bounds))

    @property
    def dim(self) -> int:
        return len(self.sides)

    @property
    def lengths(self) -> tuple[Fraction, ...]:
        return tuple(hi - lo for lo, hi in self.sides)

    @property
    def center(self) -> tuple[Fraction, ...]:
        return tuple((lo + hi) / 2 for lo, hi in self.sides)

    def diameter_squared(self) -> Fraction:
        return sum((length * length for length in self.lengths), Fraction(0))

    def dilate(self, factor: Number) -> Box:
        """Dilate every side about its center."""
        factor = as_fraction(factor)
        if factor <= 0:
            raise ContractError(f"Dilation factor must be positive, got {factor}")
        sides = []
        for (lo, hi), c in zip(self.sides, self.center):
            half = (hi - lo) * factor / 2
            sides.append((c - half, c + half))
        return Box(tuple(sides))

    def contains(self, other: Box) -> bool:
        return self.dim == other.dim and all(
            lo <= olo and ohi <= hi for (lo, hi), (olo, ohi) in zip(self.sides, other.sides)
        )

    def overlaps(self, other: Box) -> bool:
        """Open interiors intersect."""
        return all(
            lo < ohi and olo < hi for (lo, hi), (olo, ohi) in zip(self.sides, other.sides)
        )


@dataclass(frozen=True, order=True)
class QuasiCube:
    """Product of shifted dyadic intervals whose lengths differ by at most a factor 2."""

    components: tuple[ShiftedDyadicInterval, ...]

    def __post_init__(self):
        components = tuple(self.components)
        if not components:
            raise ContractError("A quasi-cube needs at least one component")
        scales = [c.j for c in components]
        if max(scales) - min(scales) > 1:
            raise ContractError(f"Component scales {scales} are not comparable within 2")
        object.__setattr__(self, "components", components)

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def side(self) -> Fraction:
        """l(Q): length of the first component."""
        return self.components[0].length

    @property
    def scale(self) -> int:
        return self.components[0].j

    @property
    def volume(self) -> Fraction:
        return math.prod(c.length for c in self.components)

    def box(self) -> Box:
        return Box(tuple(c.endpoints() for c in self.components))

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in self.components]

    @classmethod
    def from_list(cls, data: list[dict]) -> QuasiCube:
        return cls(tuple(ShiftedDyadicInterval.from_dict(d) for d in data))


def _as_box(obj: QuasiCube | Box | ShiftedDyadicInterval | Sequence) -> Box:
    if isinstance(obj, Box):
        return obj
    if isinstance(obj, (QuasiCube, ShiftedDyadicInterval)):
        return obj.box()
    # a bare (lo, hi) pair or a sequence of pairs
    if len(obj) == 2 and not isinstance(obj[0], (tuple, list)):
        return Box((tuple(obj),))
    return Box(tuple(tuple(side) for side in obj))


def dilate(obj: QuasiCube | Box | ShiftedDyadicInterval | Sequence, factor: Number) -> Box:
    return _as_box(obj).dilate(factor)


def shrink(obj: QuasiCube | Box | ShiftedDyadicInterval | Sequence, fraction: Number) -> Box:
    """Shrink each side about its center by ``fraction`` in (0, 1]."""
    fraction = as_fraction(fraction)
    if not 0 < fraction <= 1:
        raise ContractError(f"Shrink fraction must lie in (0, 1], got {fraction}")
    return _as_box(obj).dilate(fraction)


def _interval_from_numerator(j: int, t: int) -> ShiftedDyadicInterval:
    """Interval with left endpoint t * 2^j / 3."""
    sigma = parity_sign(j)
    alpha = (sigma * t) % 3
    k = (t - sigma * alpha) // 3
    return ShiftedDyadicInterval(j, k, alpha)


def cover_cube(target: Box | Sequence, max_extra_scales: int = 4) -> QuasiCube:
    """Smallest shifted dyadic quasi-cube Q with target inside 7/10 Q.

    All components share one scale. Ties are broken by smallest k, then
    smallest alpha, axis by axis. l(target) is the longest target side, and
    l(Q) <= 8 l(target): the left endpoints of one scale are 2^j/3 apart, so
    a cover exists once 2^j >= 30/11 l(target), at the latest one scale above
    the first scale with 7/10 2^j >= l(target).

    Raises:
        ContractError: If the target side ratio exceeds 2
        GeometryError: If no scale in the scanned window admits a cover, or
            the cover is more than 8 times the longest target side
    """
    box = _as_box(target)
    lengths = box.lengths
    longest, shortest = max(lengths), min(lengths)
    if shortest <= 0 or longest > 2 * shortest:
        raise ContractError(f"Target sides {lengths} are not comparable within a factor 2")

    j0 = math.ceil(math.log2(longest / SHRINK_COVER))
    while SHRINK_COVER * Fraction(2) ** j0 < longest:
        j0 += 1
    while SHRINK_COVER * Fraction(2) ** (j0 - 1) >= longest:
        j0 -= 1

    margin = (1 - SHRINK_COVER) / 2
    for j in range(j0, j0 + max_extra_scales + 1):
        size = Fraction(2) ** j
        components = []
        for lo, hi in box.sides:
            low_left = hi - (1 - margin) * size
            high_left = lo - margin * size
            t_min = math.ceil(3 * low_left / size)
            t_max = math.floor(3 * high_left / size)
            if t_min > t_max:
                break
            options = [_interval_from_numerator(j, t) for t in range(t_min, t_max + 1)]
            components.append(min(options, key=lambda c: (c.k, c.alpha_index)))
        else:
            if size > COVER_FACTOR * longest:
                raise GeometryError(
                    f"Cover side {size} exceeds {COVER_FACTOR} times the target side {longest}"
                )
            return QuasiCube(tuple(components))
    raise GeometryError(
        f"No shifted dyadic cover for {box} at scales {j0}..{j0 + max_extra_scales}"
    )


class RegionParams(BaseModel):
    """Implicit constants of the comparison symbols used for regions.

    ``A << B`` means c_sep*A <= B, ``A ~ B`` means max/min <= c_comp, and a
    cube is adapted to a line when c_dist*diam <= dist <= 100*c_dist*diam.
    Generated cube families use the tighter window
    c_dist <= dist/diam <= band*c_dist.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    c_sep: float = Field(default=16.0, gt=1, allow_inf_nan=False)
    c_comp: float = Field(default=4.0, gt=1, allow_inf_nan=False)
    c_dist: float = Field(default=4.0, gt=1, allow_inf_nan=False)
    band: float = Field(default=4.0, gt=1, allow_inf_nan=False)

    @model_validator(mode="after")
    def _band_window(self):
        if self.band < 2 + 2 / self.c_dist or self.band > 100:
            raise ValueError(
                f"band must lie in [2 + 2/c_dist, 100] = [{2 + 2 / self.c_dist:.4g}, 100], "
                f"got {self.band}"
            )
        return self


def is_adapted(Q: QuasiCube, a: Sequence[Number], rp: RegionParams) -> bool:
    """Whether every consecutive face (Q_j, Q_{j+1}) is adapted to a_j x_j < a_{j+1} x_{j+1}.

    Raises:
        ContractError: If len(a) differs from the cube dimension or is below 2
    """
    a = [as_fraction(v) for v in a]
    if len(a) != Q.dim or len(a) < 2:
        raise ContractError(f"Coefficient vector of length {len(a)} for a {Q.dim}-cube")
    if any(v <= 0 for v in a):
        raise ContractError(f"Coefficients must be positive, got {a}")
    c = as_fraction(rp.c_dist)
    sides = Q.box().sides
    for i in range(len(a) - 1):
        (lo1, hi1), (lo2, hi2) = sides[i], sides[i + 1]
        gap = a[i + 1] * lo2 - a[i] * hi1
        if gap <= 0:
            return False
        diam2 = (hi1 - lo1) ** 2 + (hi2 - lo2) ** 2
        norm2 = a[i] ** 2 + a[i + 1] ** 2
        if not c * c * diam2 * norm2 <= gap * gap <= (100 * c) ** 2 * diam2 * norm2:
            return False
    return True


def is_sparse(cubes: Sequence[QuasiCube], C: Number) -> bool:
    """Sparseness by volume.

    |Q| < |Q'| requires |CQ| = C^d |Q| < |Q'|, and |Q| = |Q'| requires CQ and CQ' to be
    disjoint.

    Raises:
        ContractError: If C <= 1 or the cubes have different dimensions
    """
    C = as_fraction(C)
    if C <= 1:
        raise ContractError(f"Sparseness constant must exceed 1, got {C}")
    if len({q.dim for q in cubes}) > 1:
        raise ContractError("Sparseness needs quasi-cubes of one dimension")
    for first, second in combinations(cubes, 2):
        small, big = sorted((first, second), key=lambda q: q.volume)
        if small.volume < big.volume:
            if not C**small.dim * small.volume < big.volume:
                return False
        elif small.box().dilate(C).overlaps(big.box().dilate(C)):
            return False
    return True
