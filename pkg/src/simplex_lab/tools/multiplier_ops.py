# src/simplex_lab/tools/multiplier_ops.py
"""Frequency-side simplex operators, their maximal variants and kernel cross-checks.

For spectra c_j of f_1..f_n on a common grid the simplex operator is

    T(x_m) = sum_{k_1 < ... < k_n} prod_j c_j(k_j) exp(2 pi i (sum_j alpha_j s_j k_j) m / N)

evaluated by the prefix recursion U_j(x, K) = sum_{k < K} c_j(k) e_j(x, k) U_{j-1}(x, k)
over the active frequencies, in chunks of sample points.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from simplex_lab.errors import (
    ContractError,
    DomainError,
    PlanError,
    WorkBudgetError,
)
from simplex_lab.tools.grid_core import GridFunction, Spectrum, dft, idft, lp_quasinorm
from simplex_lab.tools.symbol_factory import Bump1D, SymbolExpr

logger = logging.getLogger(__name__)

MAX_GRID = 2**14
MAX_WORK = 2**31
CHUNK_ELEMENTS = 2**22
ACTIVE_TOLERANCE = 1e-14
MAX_KERNEL_T3 = 512


class SimplexOpSpec(BaseModel):
    """Arity, phase signs, phase coefficients and sup flag of a simplex operator."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(ge=1, le=8)
    signs: tuple[int, ...] | None = None
    alpha: tuple[float, ...] | None = None
    maximal: bool = False
    require_nondegenerate: bool = False

    @model_validator(mode="after")
    def _shapes(self):
        if self.signs is not None:
            if len(self.signs) != self.n or any(s not in (1, -1) for s in self.signs):
                raise ValueError(f"signs must be {self.n} entries of +1/-1, got {self.signs}")
        if self.alpha is not None and len(self.alpha) != self.n:
            raise ValueError(f"alpha must have {self.n} entries, got {self.alpha}")
        return self

    @classmethod
    def simplex(cls, n: int, **kwargs) -> SimplexOpSpec:
        return cls(n=n, **kwargs)

    @classmethod
    def alternating(cls, n: int, **kwargs) -> SimplexOpSpec:
        """Phase x*(xi_1 - xi_2 + xi_3 - ...)."""
        return cls(n=n, signs=tuple(1 if j % 2 == 0 else -1 for j in range(n)), **kwargs)

    @property
    def rates(self) -> tuple[float, ...]:
        """Effective phase coefficients alpha_j * s_j."""
        signs = self.signs or (1,) * self.n
        alpha = self.alpha or (1.0,) * self.n
        return tuple(a * s for a, s in zip(alpha, signs))

    def degenerate_blocks(self) -> list[tuple[int, int]]:
        """1-based (j1, j2) with alpha_j1 s_j1 + ... + alpha_j2 s_j2 == 0."""
        rates = [Fraction(r).limit_denominator(10**6) for r in self.rates]
        return [
            (j1 + 1, j2 + 1)
            for j1 in range(self.n)
            for j2 in range(j1, self.n)
            if sum(rates[j1 : j2 + 1]) == 0
        ]

    @property
    def nondegenerate(self) -> bool:
        return not self.degenerate_blocks()


def _common_grid(fs: Sequence[GridFunction], n: int | None = None) -> tuple[int, float]:
    if not fs:
        raise ContractError("At least one input function is required")
    if n is not None and len(fs) != n:
        raise ContractError(f"Operator takes {n} functions, got {len(fs)}")
    for f in fs[1:]:
        fs[0].require_same_grid(f)
    return fs[0].N, fs[0].period


def active_frequencies(spectra: Sequence[Spectrum], tol: float = ACTIVE_TOLERANCE) -> np.ndarray:
    """Frequencies where some input has a coefficient above tol * (largest modulus)."""
    stack = np.abs(np.stack([s.coefficients for s in spectra]))
    scale = stack.max(initial=0.0)
    if scale == 0:
        return np.array([], dtype=np.int64)
    N = spectra[0].N
    return np.flatnonzero((stack > tol * scale).any(axis=0)) - N // 2


def _phases(rows: np.ndarray, ks: np.ndarray, rate: float, N: int) -> np.ndarray:
    if float(rate).is_integer():
        index = (int(rate) * np.outer(rows, ks)) % N
        return np.exp(2j * np.pi * np.arange(N) / N)[index]
    return np.exp(2j * np.pi * rate * np.outer(rows, ks) / N)


def _sweep(spec: SimplexOpSpec, fs: Sequence[GridFunction], tol: float) -> GridFunction:
    N, L = _common_grid(fs, spec.n)
    if N > MAX_GRID:
        raise WorkBudgetError(f"Grid size {N} exceeds the simplex operator limit {MAX_GRID}")
    if spec.require_nondegenerate and not spec.nondegenerate:
        raise ContractError(
            f"Phase vector {spec.rates} is degenerate on blocks {spec.degenerate_blocks()}"
        )
    spectra = [dft(f) for f in fs]
    ks = active_frequencies(spectra, tol)
    K = ks.size
    work = spec.n * N * K
    if work > MAX_WORK:
        raise WorkBudgetError(f"Simplex sweep needs n*N*K = {work} operations, limit {MAX_WORK}")
    if work > MAX_WORK // 2:
        logger.warning("Simplex sweep close to the work budget: %d of %d", work, MAX_WORK)
    if K == 0:
        return GridFunction.zeros(N, L)

    coefficients = np.stack([s.coefficients[ks + N // 2] for s in spectra])
    rows_all = np.arange(N)
    out = np.zeros(N, dtype=np.complex128)
    chunk = max(1, CHUNK_ELEMENTS // K)
    for start in range(0, N, chunk):
        rows = rows_all[start : start + chunk]
        prefix = np.ones((rows.size, K), dtype=np.complex128)
        for j, rate in enumerate(spec.rates):
            terms = coefficients[j] * _phases(rows, ks, rate, N) * prefix
            if j < spec.n - 1:
                running = np.cumsum(terms, axis=1)
                prefix = np.concatenate([np.zeros((rows.size, 1)), running[:, :-1]], axis=1)
        if spec.maximal:
            out[start : start + rows.size] = np.maximum(
                0.0, np.abs(np.cumsum(terms, axis=1)).max(axis=1)
            )
        else:
            out[start : start + rows.size] = terms.sum(axis=1)
    return GridFunction(out, L)


def simplex_apply(
    spec: SimplexOpSpec, fs: Sequence[GridFunction], *, tol: float = ACTIVE_TOLERANCE
) -> GridFunction:
    """Evaluate the (strict) simplex operator described by ``spec``.

    With ``spec.maximal`` the result is the sup over frequency cutoffs, as in
    maximal_apply.

    Raises:
        GridError: If the inputs live on different grids
        ContractError: If the arity is wrong or a demanded nondegeneracy fails
        WorkBudgetError: If the grid or the n*N*K sweep exceeds the budget
    """
    return _sweep(spec, fs, tol)


def maximal_apply(
    spec: SimplexOpSpec, fs: Sequence[GridFunction], *, tol: float = ACTIVE_TOLERANCE
) -> GridFunction:
    """x -> max over cutoffs K of |U_n(x, K)|; n=1 is the discrete Carleson operator."""
    return _sweep(spec.model_copy(update={"maximal": True}), fs, tol)


def carleson(f: GridFunction) -> GridFunction:
    return maximal_apply(SimplexOpSpec(n=1), [f])


def full_product_reference(fs: Sequence[GridFunction]) -> GridFunction:
    _common_grid(fs)
    samples = np.ones(fs[0].N, dtype=np.complex128)
    for f in fs:
        samples = samples * f.samples
    return fs[0].with_samples(samples)


def ordering_sum(fs: Sequence[GridFunction], spec: SimplexOpSpec | None = None) -> GridFunction:
    """Sum of the simplex operator over all orderings of the arguments.

    Equals the pointwise product when no two inputs share a frequency.
    """
    spec = spec or SimplexOpSpec(n=len(fs))
    total = GridFunction.zeros(fs[0].N, fs[0].period)
    for order in itertools.permutations(range(len(fs))):
        total = total + simplex_apply(spec, [fs[i] for i in order])
    return total


def bht_frequency(f1: GridFunction, f2: GridFunction) -> GridFunction:
    """Operator with symbol i*pi*sgn(xi_2 - xi_1): the p.v. of f1(x-t) f2(x+t) dt/t."""
    spec = SimplexOpSpec(n=2)
    forward = simplex_apply(spec, [f1, f2])
    backward = simplex_apply(spec, [f2, f1])
    return (forward - backward) * (1j * math.pi)


def _band(f: GridFunction, tol: float = 1e-10) -> int:
    coefficients = np.abs(dft(f).coefficients)
    scale = coefficients.max(initial=0.0)
    if scale == 0:
        return 0
    return int(np.max(np.abs(np.flatnonzero(coefficients > tol * scale) - f.N // 2)))


def _hilbert_weights(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Odd shifts r and weights (2 pi / N) cot(pi r / N) of the periodic p.v. kernel."""
    r = np.arange(1, N, 2)
    return r, 2 * np.pi / N * (1 / np.tan(np.pi * r / N))


@dataclass
class KernelResult:
    output: GridFunction
    band: int
    band_limited: bool
    metadata: dict = field(default_factory=dict)


def bht_kernel(f1: GridFunction, f2: GridFunction) -> KernelResult:
    """Discrete principal value sum of f1(x - t) f2(x + t) / t over t = L r / N.

    The periodized kernel is sampled at odd r only, which makes the sum exact
    for frequency differences below N/2 in modulus.
    """
    N, L = _common_grid([f1, f2])
    band = max(_band(f1), _band(f2))
    limited = band <= N // 4
    if not limited:
        logger.warning("bht_kernel inputs exceed the band N/4 = %d (band %d)", N // 4, band)
    out = np.zeros(N, dtype=np.complex128)
    for r, weight in zip(*_hilbert_weights(N)):
        out += weight * np.roll(f1.samples, r) * np.roll(f2.samples, -r)
    return KernelResult(f1.with_samples(out), band, limited, {"band_limit": N // 4})


def t3_kernel(
    f1: GridFunction, f2: GridFunction, f3: GridFunction, variant: str = "plus"
) -> KernelResult:
    """Double p.v. sum for the trilinear kernels.

    plus:  f1(x - t1) f2(x + t1 + t2) f3(x - t2)
    minus: f1(x - t1) f2(x - t1 - t2) f3(x - t2)

    Raises:
        ContractError: Unknown variant
        WorkBudgetError: If N exceeds the O(N^3) kernel limit
    """
    if variant not in ("plus", "minus"):
        raise ContractError(f"Unknown kernel variant: {variant}")
    N, L = _common_grid([f1, f2, f3])
    if N > MAX_KERNEL_T3:
        raise WorkBudgetError(f"t3_kernel is O(N^3); N={N} exceeds {MAX_KERNEL_T3}")
    band = max(_band(f) for f in (f1, f2, f3))
    limited = 2 * band < N // 2
    if not limited:
        logger.warning("t3_kernel inputs exceed the band N/4 (band %d)", band)
    r, weights = _hilbert_weights(N)
    m = np.arange(N)
    out = np.zeros(N, dtype=np.complex128)
    direction = 1 if variant == "plus" else -1
    for r1, w1 in zip(r, weights):
        first = f1.samples[(m - r1) % N]
        index2 = (m[None, :] + direction * (r1 + r[:, None])) % N
        index3 = (m[None, :] - r[:, None]) % N
        inner = (weights[:, None] * f2.samples[index2] * f3.samples[index3]).sum(axis=0)
        out += w1 * first * inner
    return KernelResult(f1.with_samples(out), band, limited, {"variant": variant})


def symbol_apply(
    symbol: SymbolExpr | Callable[[np.ndarray], np.ndarray],
    fs: Sequence[GridFunction],
    *,
    tol: float = ACTIVE_TOLERANCE,
    max_tuples: int = 2**22,
) -> GridFunction:
    """Brute-force T_m f(x) = sum_k m(k/L) prod c_j(k_j) exp(2 pi i (sum k_j) x / L).

    The symbol is evaluated at the physical frequencies k/L of every tuple of
    active frequencies; output frequencies that leave the grid band wrap.

    Raises:
        WorkBudgetError: If the number of frequency tuples exceeds ``max_tuples``
    """
    N, L = _common_grid(fs)
    n = len(fs)
    if isinstance(symbol, SymbolExpr) and symbol.arity != n:
        raise ContractError(f"Symbol of arity {symbol.arity} applied to {n} functions")
    spectra = [dft(f) for f in fs]
    ks = active_frequencies(spectra, tol)
    if ks.size**n > max_tuples:
        raise WorkBudgetError(f"{ks.size}^{n} frequency tuples exceed the limit {max_tuples}")
    out_spectrum = np.zeros(N, dtype=np.complex128)
    if ks.size == 0:
        return GridFunction.zeros(N, L)
    tuples = np.array(list(itertools.product(ks, repeat=n)), dtype=np.int64)
    values = symbol(tuples / L) if not isinstance(symbol, SymbolExpr) else symbol(tuples / L, {})
    weights = np.asarray(values, dtype=np.complex128)
    for j, spectrum in enumerate(spectra):
        weights = weights * spectrum.coefficients[tuples[:, j] + N // 2]
    out_index = (tuples.sum(axis=1) + N // 2) % N
    np.add.at(out_spectrum, out_index, weights)
    return idft(Spectrum(out_spectrum, L))


def t3_frequency(
    f1: GridFunction, f2: GridFunction, f3: GridFunction, variant: str = "plus"
) -> GridFunction:
    """Frequency side of t3_kernel: -pi^2 times the product of two sign symbols."""
    if variant == "plus":
        def symbol(xi):
            return -math.pi**2 * np.sign(xi[:, 1] - xi[:, 0]) * np.sign(xi[:, 1] - xi[:, 2])
    elif variant == "minus":
        def symbol(xi):
            return -math.pi**2 * np.sign(xi[:, 0] + xi[:, 1]) * np.sign(xi[:, 1] + xi[:, 2])
    else:
        raise ContractError(f"Unknown kernel variant: {variant}")
    return symbol_apply(symbol, [f1, f2, f3])


@dataclass(frozen=True)
class LeafPlan:
    slot: int


@dataclass(frozen=True)
class FilterPlan:
    """Convolve the child with the kernel whose spectrum is ``bump``."""

    child: "SeparablePlan"
    bump: Bump1D


@dataclass(frozen=True)
class ProductPlan:
    children: tuple["SeparablePlan", ...]


SeparablePlan = Union[LeafPlan, FilterPlan, ProductPlan]


def plan_from_dict(data: dict) -> SeparablePlan:
    """Build a plan from {"leaf": j} / {"filter": plan, "bump": {...}} / {"product": [plans]}.

    Raises:
        PlanError: On unknown node kinds or malformed bumps
    """
    if not isinstance(data, dict):
        raise PlanError(f"Plan node must be a mapping, got {type(data).__name__}")
    if "leaf" in data:
        return LeafPlan(int(data["leaf"]))
    if "filter" in data:
        try:
            bump = Bump1D(**data["bump"])
        except (TypeError, KeyError, ContractError) as e:
            raise PlanError(f"Malformed bump in plan: {e}") from e
        return FilterPlan(plan_from_dict(data["filter"]), bump)
    if "product" in data:
        return ProductPlan(tuple(plan_from_dict(child) for child in data["product"]))
    raise PlanError(f"Unknown plan node: {sorted(data)}")


def _plan_slots(plan: SeparablePlan) -> list[int]:
    if isinstance(plan, LeafPlan):
        return [plan.slot]
    if isinstance(plan, FilterPlan):
        return _plan_slots(plan.child)
    if isinstance(plan, ProductPlan):
        if len(plan.children) < 2:
            raise PlanError("A product node needs at least two children")
        return [slot for child in plan.children for slot in _plan_slots(child)]
    raise PlanError(f"Unknown plan node: {plan!r}")


def _run_plan(plan: SeparablePlan, fs: Sequence[GridFunction]) -> GridFunction:
    if isinstance(plan, LeafPlan):
        return fs[plan.slot]
    if isinstance(plan, FilterPlan):
        child = dft(_run_plan(plan.child, fs))
        frequencies = child.frequencies / child.period
        return idft(Spectrum(child.coefficients * plan.bump(frequencies), child.period))
    return full_product_reference([_run_plan(child, fs) for child in plan.children])


def separable_apply(plan: SeparablePlan | dict, fs: Sequence[GridFunction]) -> GridFunction:
    """Evaluate a cascade of pointwise products and bump filters.

    Every slot 0..n-1 must appear exactly once among the leaves. Products are
    formed on the grid, so the combined band of a product must stay below N/2.

    Raises:
        PlanError: If the plan is malformed or does not use each input once
    """
    if isinstance(plan, dict):
        plan = plan_from_dict(plan)
    _common_grid(fs)
    slots = _plan_slots(plan)
    if sorted(slots) != list(range(len(fs))):
        raise PlanError(f"Plan leaves {sorted(slots)} must use slots 0..{len(fs) - 1} once")
    return _run_plan(plan, fs)


def hoelder_ratio(
    spec: SimplexOpSpec, fs: Sequence[GridFunction], p_out: float | None = None
) -> float:
    """||T(f_1..f_n)||_{p_out} / prod ||f_j||_2 with p_out defaulting to 2/n.

    Raises:
        DomainError: If some input has zero L^2 norm
    """
    p_out = 2.0 / spec.n if p_out is None else p_out
    denominator = math.prod(lp_quasinorm(f, 2) for f in fs)
    if denominator == 0:
        raise DomainError("Hoelder ratio undefined: an input has zero L^2 norm")
    return lp_quasinorm(simplex_apply(spec, fs), p_out) / denominator

