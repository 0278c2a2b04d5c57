# src/simplex_lab/tools/grid_core.py
"""Periodic sampled functions, spectra, quasinorms and test-function presets.

Conventions used by every other module:

- A GridFunction holds f(x_m) at x_m = L*m/N, m = 0..N-1.
- Its Spectrum holds the Fourier-series coefficients
  c_k = (1/N) * sum_m f(x_m) exp(-2 pi i k m / N) for k in [-N/2, N/2),
  so that f(x_m) = sum_k c_k exp(2 pi i k x_m / L). The Nyquist bin sits on
  the negative side.
- Parseval then reads sum |f(x_m)|^2 * L/N = L * sum |c_k|^2, and all
  quasinorms use the Riemann weight L/N.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from simplex_lab.errors import AliasingError, ContractError, DomainError, GridError

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<qd")


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def check_grid_size(N: int) -> int:
    """Validate a grid size, returning it as an int."""
    if int(N) != N or not is_power_of_two(int(N)) or N < 8:
        raise GridError(f"Grid size must be a power of two >= 8, got {N}")
    return int(N)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex periodic function sampled on the uniform grid of [0, L).

    Instances are immutable: the sample array is copied and marked read-only.
    """

    samples: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128)
        if samples.ndim != 1:
            raise GridError(f"Samples must be one-dimensional, got shape {samples.shape}")
        check_grid_size(samples.size)
        if not np.all(np.isfinite(samples)):
            raise GridError("Samples contain NaN or infinite values")
        period = float(self.period)
        if not (math.isfinite(period) and period > 0):
            raise GridError(f"Period must be positive and finite, got {self.period}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "period", period)

    @classmethod
    def zeros(cls, N: int, period: float = 1.0) -> GridFunction:
        return cls(np.zeros(check_grid_size(N), dtype=np.complex128), period)

    @classmethod
    def constant(cls, value: complex, N: int, period: float = 1.0) -> GridFunction:
        return cls(np.full(check_grid_size(N), value, dtype=np.complex128), period)

    @property
    def N(self) -> int:
        return self.samples.size

    @property
    def spacing(self) -> float:
        return self.period / self.N

    @property
    def x(self) -> np.ndarray:
        return self.period * np.arange(self.N) / self.N

    @property
    def centered_x(self) -> np.ndarray:
        """Grid coordinates shifted to [-L/2, L/2)."""
        return self.x - self.period / 2

    def same_grid(self, other: GridFunction) -> bool:
        return self.N == other.N and self.period == other.period

    def require_same_grid(self, other: GridFunction) -> None:
        if not self.same_grid(other):
            raise GridError(
                f"Grid mismatch: (N={self.N}, L={self.period}) vs "
                f"(N={other.N}, L={other.period})"
            )

    def with_samples(self, samples: np.ndarray) -> GridFunction:
        return GridFunction(samples, self.period)

    def _operand(self, other) -> np.ndarray | complex:
        if isinstance(other, GridFunction):
            self.require_same_grid(other)
            return other.samples
        return other

    def __add__(self, other) -> GridFunction:
        return self.with_samples(self.samples + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other) -> GridFunction:
        return self.with_samples(self.samples - self._operand(other))

    def __mul__(self, other) -> GridFunction:
        return self.with_samples(self.samples * self._operand(other))

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return self.with_samples(-self.samples)

    def conj(self) -> GridFunction:
        return self.with_samples(np.conj(self.samples))

    def inner(self, other: GridFunction) -> complex:
        """Discrete inner product sum f * conj(g) * L/N."""
        self.require_same_grid(other)
        return complex(np.vdot(other.samples, self.samples) * self.spacing)

    def to_bytes(self) -> bytes:
        """Little-endian (N, L) header followed by interleaved re/im doubles."""
        return _HEADER.pack(self.N, self.period) + self.samples.astype("<c16").tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> GridFunction:
        N, period = _HEADER.unpack_from(payload)
        body = payload[_HEADER.size :]
        if len(body) != 16 * N:
            raise GridError(f"Payload holds {len(body)} bytes, expected {16 * N}")
        return cls(np.frombuffer(body, dtype="<c16").astype(np.complex128), period)

    def to_json(self) -> str:
        pairs = [[float(z.real), float(z.imag)] for z in self.samples]
        return json.dumps({"N": self.N, "period": self.period, "samples": pairs})

    @classmethod
    def from_json(cls, text: str) -> GridFunction:
        data = json.loads(text)
        pairs = np.asarray(data["samples"], dtype=float).reshape(-1, 2)
        if pairs.shape[0] != data["N"]:
            raise GridError(f"JSON declares N={data['N']} but holds {pairs.shape[0]} samples")
        return cls(pairs[:, 0] + 1j * pairs[:, 1], data["period"])


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier-series coefficients on the symmetric frequency range [-N/2, N/2)."""

    coefficients: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=np.complex128)
        check_grid_size(coefficients.size)
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "period", float(self.period))

    @property
    def N(self) -> int:
        return self.coefficients.size

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.N // 2, self.N // 2)

    def coefficient(self, k: int) -> complex:
        return complex(self.coefficients[k + self.N // 2])


def dft(f: GridFunction) -> Spectrum:
    return Spectrum(np.fft.fftshift(np.fft.fft(f.samples)) / f.N, f.period)


def idft(s: Spectrum) -> GridFunction:
    return GridFunction(np.fft.ifft(np.fft.ifftshift(s.coefficients)) * s.N, s.period)


def lp_quasinorm(f: GridFunction | np.ndarray, p: float, *, period: float | None = None) -> float:
    """Discrete L^p quasinorm (sum |f(x_m)|^p * L/N)^(1/p).

    Args:
        f: Grid function, or a bare sample array (any length) on period ``period``
        p: Exponent in (0, inf]; ``math.inf`` gives the maximum modulus
        period: Period for bare arrays (default 1); ignored for GridFunction

    Raises:
        DomainError: If p <= 0
    """
    if not p > 0:
        raise DomainError(f"Quasinorm exponent must be positive, got {p}")
    if isinstance(f, GridFunction):
        values, period = np.abs(f.samples), f.period
    else:
        values = np.abs(np.asarray(f, dtype=np.complex128))
        period = 1.0 if period is None else float(period)
    if values.size == 0:
        return 0.0
    if math.isinf(p):
        return float(values.max())
    weight = period / values.size
    return float(np.sum(values**p) * weight) ** (1.0 / p)


def _mask(f: GridFunction, a: float, width: float) -> np.ndarray:
    # Offset by a tiny fraction of a cell so grid points on the endpoints
    # land on the left-closed side.
    shift = 1e-9 * f.spacing
    return np.mod(f.x - a + shift, f.period) < width


def truncate(f: GridFunction, a: float, b: float) -> GridFunction:
    """Multiply by the indicator of [a, b), taken modulo the period.

    Raises:
        ContractError: If the interval is empty
    """
    if not b > a:
        raise ContractError(f"Empty truncation interval [{a}, {b})")
    width = b - a
    if width >= f.period:
        return f
    return f.with_samples(np.where(_mask(f, a, width), f.samples, 0))


def window(f: GridFunction, width: float, center: float | None = None) -> GridFunction:
    """Truncate to the window of given width centered at ``center`` (default L/2)."""
    center = f.period / 2 if center is None else center
    return truncate(f, center - width / 2, center + width / 2)


def critical_chirp_period(N: int) -> float:
    """Period at which exp(i x^2) on [-L/2, L/2) sweeps exactly the grid band.

    At L = sqrt(pi*N) the samples are exp(i*pi*m^2/N) for m in [-N/2, N/2),
    whose discrete spectrum has constant modulus.
    """
    return math.sqrt(math.pi * check_grid_size(N))


class _Preset(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class PureMode(_Preset):
    kind: Literal["pure_mode"] = "pure_mode"
    k: int


class Chirp(_Preset):
    kind: Literal["chirp"] = "chirp"
    sign: Literal[1, -1] = 1
    rate: float = Field(default=1.0, gt=0)


class Gaussian(_Preset):
    kind: Literal["gaussian"] = "gaussian"
    center: float = 0.5
    width: float = Field(default=0.05, gt=0)
    modulation: float = 0.0


class Indicator(_Preset):
    kind: Literal["indicator"] = "indicator"
    a: float
    b: float

    @model_validator(mode="after")
    def _nonempty(self):
        if not self.b > self.a:
            raise ValueError(f"indicator needs a < b, got [{self.a}, {self.b})")
        return self


class RandomBandlimited(_Preset):
    kind: Literal["random_bandlimited"] = "random_bandlimited"
    band: int = Field(ge=0)
    seed: int = 0


Preset = Annotated[
    Union[PureMode, Chirp, Gaussian, Indicator, RandomBandlimited], Field(discriminator="kind")
]
PRESET_ADAPTER: TypeAdapter[Preset] = TypeAdapter(Preset)


def random_band_coefficients(band: int, seed: int) -> np.ndarray:
    """Complex normal coefficients for k = -band..band; independent of the grid."""
    rng = np.random.default_rng(seed)
    size = 2 * band + 1
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2)


def from_coefficients(
    coefficients: np.ndarray, frequencies: np.ndarray, N: int, L: float = 1.0
) -> GridFunction:
    """Synthesize sum_k c_k exp(2 pi i k x / L) on the grid by direct summation."""
    N = check_grid_size(N)
    frequencies = np.asarray(frequencies, dtype=np.int64)
    if frequencies.size and (frequencies.min() < -N // 2 or frequencies.max() >= N // 2):
        raise AliasingError(f"Frequencies exceed the band [-{N // 2}, {N // 2}) of N={N}")
    spectrum = np.zeros(N, dtype=np.complex128)
    np.add.at(spectrum, frequencies + N // 2, np.asarray(coefficients, dtype=np.complex128))
    return idft(Spectrum(spectrum, L))


def from_preset(preset: Preset | dict, N: int, L: float = 1.0) -> GridFunction:
    """Sample a canonical test function on the (N, L) grid.

    Raises:
        GridError: If N is not a power of two >= 8
        AliasingError: If a mode or band does not fit below N/2
    """
    N = check_grid_size(N)
    if isinstance(preset, dict):
        preset = PRESET_ADAPTER.validate_python(preset)
    m = np.arange(N)
    x = L * m / N

    if isinstance(preset, PureMode):
        if not -N // 2 <= preset.k < N // 2:
            raise AliasingError(f"Mode {preset.k} does not fit on a grid of size {N}")
        samples = np.exp(2j * np.pi * preset.k * m / N)
    elif isinstance(preset, Chirp):
        xc = x - L / 2
        samples = np.exp(1j * preset.sign * preset.rate * xc**2)
    elif isinstance(preset, Gaussian):
        offset = np.mod(x - preset.center + L / 2, L) - L / 2
        envelope = np.exp(-0.5 * (offset / preset.width) ** 2)
        samples = envelope * np.exp(2j * np.pi * preset.modulation * x)
    elif isinstance(preset, Indicator):
        samples = ((x >= preset.a) & (x < preset.b)).astype(np.complex128)
    elif isinstance(preset, RandomBandlimited):
        if preset.band >= N // 2:
            raise AliasingError(f"Band {preset.band} must be below N/2 = {N // 2}")
        coefficients = random_band_coefficients(preset.band, preset.seed)
        return from_coefficients(coefficients, np.arange(-preset.band, preset.band + 1), N, L)
    else:
        raise ValueError(f"Unknown preset: {preset!r}")

    return GridFunction(samples, L)
