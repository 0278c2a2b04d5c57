# src/simplex_lab/tools/akns_lab.py
"""Upper-triangular AKNS systems u' = i lambda D u + N u.

The substitution u_k = exp(i lambda d_k x) v_k turns the system into
v' = W v with w_lm = a_lm exp(i lambda (d_m - d_l) x). For upper-triangular
potentials v_n is constant and every other component is an antiderivative
of the components below it, which is how the bottom-up solver proceeds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, dblquad, quad, solve_ivp, trapezoid

from simplex_lab.errors import ContractError, SizeGuardError, ToleranceError
from simplex_lab.tools.dyadic_geometry import as_fraction
from simplex_lab.tools.grid_core import GridFunction, Spectrum, dft, idft
from simplex_lab.tools.multiplier_ops import SimplexOpSpec, carleson

logger = logging.getLogger(__name__)

Potential = Callable[[np.ndarray | float], np.ndarray | complex]

MIN_STEPS = 1000
RTOL = 1e-8
ATOL = 1e-10
FALLBACK_RTOLS = (1e-6, 1e-4)
MAX_PICARD_ORDER = 4


@dataclass(frozen=True, eq=False)
class AknsSystem:
    """Diagonal d_1..d_n, off-diagonal potentials keyed by 1-based (l, m), and lambda."""

    d: tuple[float, ...]
    potentials: Mapping[tuple[int, int], Potential]
    lam: float

    def __post_init__(self):
        d = tuple(float(x) for x in self.d)
        if len(d) < 2:
            raise ContractError(f"An AKNS system needs n >= 2, got {len(d)}")
        if len(set(d)) != len(d):
            raise ContractError(f"Diagonal entries must be distinct, got {d}")
        if self.lam == 0:
            raise ContractError("lambda must be nonzero")
        for l, m in self.potentials:
            if not (1 <= l <= len(d) and 1 <= m <= len(d)):
                raise ContractError(f"Potential index ({l}, {m}) outside 1..{len(d)}")
            if l == m:
                raise ContractError(f"Diagonal potential a_{l}{m} must vanish")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "potentials", dict(self.potentials))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def n(self) -> int:
        return len(self.d)

    @property
    def upper_triangular(self) -> bool:
        return all(l < m for l, m in self.potentials)

    def phase(self, l: int, m: int) -> float:
        return self.lam * (self.d[m - 1] - self.d[l - 1])

    def w(self, l: int, m: int, x):
        """Entry w_lm(x) of the gauge-transformed matrix."""
        potential = self.potentials.get((l, m))
        if potential is None:
            return 0j * np.asarray(x)
        return potential(x) * np.exp(1j * self.phase(l, m) * np.asarray(x))

    def W(self, x: float) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.complex128)
        for l, m in self.potentials:
            out[l - 1, m - 1] = self.w(l, m, x)
        return out

    def shifted(self, c: float) -> AknsSystem:
        """Same system with every d_k moved by c; W is unchanged."""
        return AknsSystem(tuple(x + c for x in self.d), self.potentials, self.lam)

    def with_lambda(self, lam: float) -> AknsSystem:
        return AknsSystem(self.d, self.potentials, lam)


def potential_from_grid(f: GridFunction) -> Potential:
    """Trigonometric interpolant of a grid function, evaluable at any x."""
    spectrum = dft(f)
    keep = np.flatnonzero(spectrum.coefficients)
    k = spectrum.frequencies[keep]
    c = spectrum.coefficients[keep]
    period = f.period

    def evaluate(x):
        return np.exp(2j * np.pi * np.multiply.outer(np.asarray(x, dtype=float), k) / period) @ c

    return evaluate


@dataclass
class Trajectory:
    x: np.ndarray
    v: np.ndarray
    system: AknsSystem
    method: str

    @property
    def u(self) -> np.ndarray:
        d = np.asarray(self.system.d)[:, None]
        return np.exp(1j * self.system.lam * d * self.x[None, :]) * self.v

    def sup(self) -> np.ndarray:
        return np.abs(self.v).max(axis=1)


def _integrate(fun, x_range: tuple[float, float], y0, x_eval: np.ndarray, what: str):
    sol = solve_ivp(
        fun, x_range, y0, method="DOP853", t_eval=x_eval, dense_output=True, rtol=RTOL, atol=ATOL
    )
    if sol.success:
        return sol
    achieved = None
    for rtol in FALLBACK_RTOLS:
        retry = solve_ivp(fun, x_range, y0, method="DOP853", t_eval=x_eval, rtol=rtol, atol=ATOL)
        if retry.success:
            achieved = rtol
            break
    raise ToleranceError(f"{what}: {sol.message}", achieved=achieved)


def solve(
    system: AknsSystem,
    x_range: tuple[float, float],
    steps: int = MIN_STEPS,
    v0: Sequence[complex] | None = None,
    *,
    method: str = "triangular",
) -> Trajectory:
    """
    Integrate v' = W v from v(x_range[0]) = v0 to relative tolerance 1e-8.

    Args:
        system: AKNS system
        x_range: Integration interval (x0, x1)
        steps: Number of output points, at least 1000
        v0: Initial value; defaults to (0, ..., 0, 1)
        method: "triangular" solves bottom-up from the constant v_n, one
            scalar antiderivative per component; "generic" integrates the
            full system

    Raises:
        ContractError: On fewer than 1000 steps, a bad initial value, an
            unknown method or a non-triangular system in triangular mode
        ToleranceError: If the integrator cannot reach the tolerance
    """
    if steps < MIN_STEPS:
        raise ContractError(f"At least {MIN_STEPS} output steps are required, got {steps}")
    n = system.n
    start = np.zeros(n, dtype=np.complex128)
    start[-1] = 1.0
    if v0 is not None:
        start = np.asarray(v0, dtype=np.complex128)
        if start.shape != (n,):
            raise ContractError(f"Initial value must have {n} entries, got shape {start.shape}")
    x = np.linspace(x_range[0], x_range[1], steps)

    if method == "generic":
        sol = _integrate(lambda t, v: system.W(t) @ v, x_range, start, x, "AKNS system")
        return Trajectory(x, sol.y, system, method)
    if method != "triangular":
        raise ContractError(f"Unknown solve method: {method}")
    if not system.upper_triangular:
        raise ContractError("Bottom-up solve needs an upper-triangular potential")

    v = np.empty((n, steps), dtype=np.complex128)
    v[n - 1] = start[n - 1]
    dense: list[Callable[[float], complex]] = [None] * n
    dense[n - 1] = lambda t, c=start[n - 1]: c
    for k in range(n - 2, -1, -1):
        sources = [m for m in range(k + 1, n) if (k + 1, m + 1) in system.potentials]

        def rhs(t, y, k=k, sources=sources):
            return np.array(
                [sum((system.w(k + 1, m + 1, t) * dense[m](t) for m in sources), 0j)]
            )

        sol = _integrate(rhs, x_range, [start[k]], x, f"component v_{k + 1}")
        v[k] = sol.y[0]
        dense[k] = lambda t, s=sol: s.sol(t)[0]
    logger.debug("Triangular AKNS solve of size %d over %s", n, x_range)
    return Trajectory(x, v, system, method)


def _complex_quad(func: Callable[[float], complex], a: float, b: float) -> complex:
    options = {"limit": 200, "epsabs": 1e-13, "epsrel": 1e-11}
    real, _ = quad(lambda t: np.real(func(t)), a, b, **options)
    imag, _ = quad(lambda t: np.imag(func(t)), a, b, **options)
    return complex(real, imag)


def _require_shape(system: AknsSystem, n: int) -> None:
    if system.n != n or not system.upper_triangular:
        raise ContractError(f"Closed form needs an upper-triangular {n}x{n} system")


def closed_form_2x2(
    system: AknsSystem,
    x: Sequence[float],
    x0: float,
    C: complex = 1.0,
    C_tilde: complex = 0.0,
) -> np.ndarray:
    """v_1(x) = C int_{x0}^x w_12(y) dy + C_tilde at increasing points x >= x0."""
    _require_shape(system, 2)
    points = np.asarray(x, dtype=float)
    if np.any(np.diff(points) < 0) or (points.size and points[0] < x0):
        raise ContractError("Evaluation points must increase from x0")
    out = np.empty(points.size, dtype=np.complex128)
    total, previous = 0j, x0
    for i, point in enumerate(points):
        total += _complex_quad(lambda y: system.w(1, 2, y), previous, point)
        out[i] = C * total + C_tilde
        previous = point
    return out


def closed_form_3x3_first_term(
    system: AknsSystem, x: float, x0: float, C: complex = 1.0
) -> complex:
    """C times the integral over x0 < z < y < x of w_12(y) w_23(z)."""
    _require_shape(system, 3)

    def integrand(z: float, y: float) -> complex:
        return system.w(1, 2, y) * system.w(2, 3, z)

    options = {"epsabs": 1e-12, "epsrel": 1e-10}
    real, _ = dblquad(lambda z, y: np.real(integrand(z, y)), x0, x, x0, lambda y: y, **options)
    imag, _ = dblquad(lambda z, y: np.imag(integrand(z, y)), x0, x, x0, lambda y: y, **options)
    return C * complex(real, imag)


def closed_form_3x3(
    system: AknsSystem, x: float, x0: float, v0: Sequence[complex]
) -> complex:
    """Full v_1(x) of a 3x3 triangular system: double integral plus two single ones."""
    _require_shape(system, 3)
    v1, v2, v3 = (complex(c) for c in v0)
    first = closed_form_3x3_first_term(system, x, x0, v3)
    second = v2 * _complex_quad(lambda y: system.w(1, 2, y), x0, x)
    third = v3 * _complex_quad(lambda y: system.w(1, 3, y), x0, x)
    return first + second + third + v1


def carleson_bound_check(
    f: GridFunction,
    d: tuple[float, float],
    lambdas: Sequence[float],
    C: complex = 1.0,
    C_tilde: complex = 0.0,
) -> list[dict]:
    """
    Compare sup_x |v_1| of a 2x2 system with |C| sup_x |int_0^x ...| + |C_tilde|.

    The trajectory is the left Riemann sum of f(y) exp(2 pi i q y / L) from
    the left end of the period. The right side comes from one discrete
    Carleson operator applied to the function whose Fourier coefficients are
    the samples of f, read at the point q. Each lambda is snapped to the
    integer shift q = round(lambda (d_2 - d_1) L / 2 pi).

    Returns:
        One row per lambda: lambda, snapped lambda, snap error, shift,
        sup_v1, carleson, bound and ratio
    """
    d1, d2 = (float(x) for x in d)
    if d1 == d2:
        raise ContractError(f"Diagonal entries must be distinct, got {d}")
    N, L = f.N, f.period
    maximal = carleson(idft(Spectrum(f.samples, L))).samples.real
    m = np.arange(N)
    rows = []
    snapped = []
    for lam in lambdas:
        if lam == 0:
            raise ContractError("lambda must be nonzero")
        nu = lam * (d2 - d1) * L / (2 * np.pi)
        q = int(round(nu))
        if q != nu:
            snapped.append(abs(nu - q))
        modulated = f.samples * np.exp(2j * np.pi * ((q * m) % N) / N)
        partial = np.concatenate([[0j], np.cumsum(modulated)[:-1]]) * (L / N)
        sup_v1 = float(np.abs(C * partial + C_tilde).max())
        value = float(maximal[q % N]) * L / N
        bound = abs(C) * value + abs(C_tilde)
        if bound > 0:
            ratio = sup_v1 / bound
        else:
            ratio = 0.0 if sup_v1 == 0 else math.inf
        rows.append(
            {
                "lambda": float(lam),
                "lambda_snapped": 2 * np.pi * q / ((d2 - d1) * L),
                "snap_error": abs(nu - q),
                "shift": q,
                "sup_v1": sup_v1,
                "carleson": value,
                "bound": bound,
                "ratio": ratio,
            }
        )
    if snapped:
        logger.warning(
            "Snapped %d of %d lambda values to grid shifts (largest error %.3g cycles)",
            len(snapped),
            len(rows),
            max(snapped),
        )
    return rows


def nondegeneracy(alpha: Sequence[float | Fraction | str]) -> tuple[bool, tuple[int, int] | None]:
    """Whether every consecutive block alpha_j1 + ... + alpha_j2 (j1 < j2) is nonzero.

    Returns:
        (True, None), or (False, (j1, j2)) for the first vanishing block, 1-based
    """
    values = [as_fraction(a) for a in alpha]
    for j1 in range(len(values)):
        running = values[j1]
        for j2 in range(j1 + 1, len(values)):
            running += values[j2]
            if running == 0:
                return False, (j1 + 1, j2 + 1)
    return True, None


def reduction_phases(d: Sequence[float], chain: Sequence[int] | None = None) -> tuple[float, ...]:
    """Phase vector of the iterated integral along a chain p_0 < p_1 < ... < p_k.

    The innermost variable carries the last edge, so
    alpha = (d_{p_k} - d_{p_(k-1)}, ..., d_{p_1} - d_{p_0}); chains have 1 to 4 edges.
    """
    chain = list(chain) if chain is not None else list(range(1, len(d) + 1))
    if not 2 <= len(chain) <= 5:
        raise ContractError(f"Chains have 1 to 4 edges, got {chain}")
    if any(b <= a for a, b in zip(chain, chain[1:])) or chain[0] < 1 or chain[-1] > len(d):
        raise ContractError(f"Chain {chain} is not increasing inside 1..{len(d)}")
    edges = list(zip(chain, chain[1:]))
    return tuple(float(d[m - 1] - d[l - 1]) for l, m in reversed(edges))


def reduction_spec(d: Sequence[float], chain: Sequence[int] | None = None) -> SimplexOpSpec:
    """Maximal simplex operator with the chain's phase vector."""
    alpha = reduction_phases(d, chain)
    return SimplexOpSpec(n=len(alpha), alpha=alpha, maximal=True, require_nondegenerate=True)


@dataclass
class PicardTerm:
    """Order-k term of the Picard expansion sampled on a grid."""

    order: int
    x: np.ndarray
    values: np.ndarray

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.array(
            [
                np.interp(points, self.x, row.real) + 1j * np.interp(points, self.x, row.imag)
                for row in self.values
            ]
        )


def _iterate(kernel: np.ndarray, start: np.ndarray, x: np.ndarray, order: int) -> list[np.ndarray]:
    """T_0 = start, T_k(x) = int_{x0}^x K(y) T_{k-1}(y) dy on the grid."""
    terms = [start]
    current = start
    for _ in range(order):
        integrand = np.einsum("tij,jt->it", kernel, current)
        current = cumulative_trapezoid(integrand, x, axis=1, initial=0)
        terms.append(current)
    return terms


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_PICARD_ORDER:
        raise SizeGuardError(f"Picard order must lie in 0..{MAX_PICARD_ORDER}, got {order}")


def picard_terms(
    system: AknsSystem,
    order: int,
    x_range: tuple[float, float],
    steps: int = 4001,
    v0: Sequence[complex] | None = None,
) -> list[PicardTerm]:
    """Terms 0..order of v(x) = sum_k int_{x0 < x_1 < ... < x_k < x} W(x_k)...W(x_1) v0."""
    _check_order(order)
    x = np.linspace(x_range[0], x_range[1], steps)
    start = np.zeros(system.n, dtype=np.complex128)
    start[-1] = 1.0
    if v0 is not None:
        start = np.asarray(v0, dtype=np.complex128)
    kernel = np.array([system.W(t) for t in x])
    terms = _iterate(kernel, np.repeat(start[:, None], steps, axis=1), x, order)
    return [PicardTerm(k, x, values) for k, values in enumerate(terms)]


def iterated_integrals(
    V: Potential, x_range: tuple[float, float], order: int, steps: int = 20001
) -> list[PicardTerm]:
    """Scalar simplex integrals int_{x_1 < ... < x_k < x} V(x_1)...V(x_k), k = 0..order."""
    _check_order(order)
    x = np.linspace(x_range[0], x_range[1], steps)
    kernel = np.asarray(V(x), dtype=np.complex128).reshape(steps, 1, 1)
    terms = _iterate(kernel, np.ones((1, steps), dtype=np.complex128), x, order)
    return [PicardTerm(k, x, values) for k, values in enumerate(terms)]


def picard_tail_bound(l1_norm: float, order: int) -> float:
    """sum_{k > order} a^k / k!, the remainder bound for ||W||_1 = a."""
    return math.exp(l1_norm) - sum(l1_norm**k / math.factorial(k) for k in range(order + 1))


@dataclass
class PicardCheck:
    order: int
    error: float
    bound: float
    l1_norm: float
    metadata: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error <= self.bound


def picard_check(
    system: AknsSystem,
    x_range: tuple[float, float],
    order: int = MAX_PICARD_ORDER,
    steps: int = 4001,
    v0: Sequence[complex] | None = None,
) -> PicardCheck:
    """Distance between the ODE solution and the truncated Picard sum, against the tail bound."""
    terms = picard_terms(system, order, x_range, steps, v0)
    x = terms[0].x
    trajectory = solve(system, x_range, steps, terms[0].values[:, 0], method="generic")
    partial = sum(term.values for term in terms)
    error = float(np.abs(trajectory.v - partial).max())
    norms = np.array([np.linalg.norm(system.W(t), 2) for t in x])
    l1_norm = float(trapezoid(norms, x))
    scale = float(np.linalg.norm(terms[0].values[:, 0]))
    return PicardCheck(order, error, picard_tail_bound(l1_norm, order) * scale, l1_norm)
