"""Configuration management for Simplex Multiplier Lab.

Two kinds of configuration live here: the versioned file of calibrated
constants that the size/energy checks assert against, and the schema of
experiment configs accepted by ``simplex-lab --config``.
"""

import json
import logging
import os
from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from simplex_lab.errors import ConfigError
from simplex_lab.tools.dyadic_geometry import RegionParams

logger = logging.getLogger(__name__)

# Load .env file if it exists (for development)
load_dotenv()

CONFIG_DIR = Path.home() / ".config" / "simplex-lab"
CONFIG_FILE = CONFIG_DIR / "config.env"
CONSTANTS_ENV_VAR = "SIMPLEX_LAB_CONSTANTS"
DEFAULT_CONSTANTS_FILE = Path(__file__).parent / "data" / "constants.json"


class CalibratedConstants(BaseModel):
    """Empirical constants of the size/energy inequalities, frozen per version."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    version: str
    seed: int
    c_jn: float = Field(gt=1)
    c_cal: float = Field(gt=0)
    c_tool: float = Field(gt=0)
    c_bessel: float = Field(gt=0)
    c_strat: float = Field(gt=0)
    ensemble: dict[str, int | float | str] = Field(default_factory=dict)


def get_constants_path() -> Path:
    """Resolve the calibrated constants file.

    Priority order:
    1. SIMPLEX_LAB_CONSTANTS environment variable
    2. Config file at ~/.config/simplex-lab/config.env
    3. The constants file shipped with the package

    Returns:
        Path of the constants file to load
    """
    override = os.getenv(CONSTANTS_ENV_VAR)
    if override:
        return Path(override)

    if CONFIG_FILE.exists():
        load_dotenv(CONFIG_FILE)
        override = os.getenv(CONSTANTS_ENV_VAR)
        if override:
            return Path(override)

    return DEFAULT_CONSTANTS_FILE


def save_constants_path(path: Path) -> None:
    """Persist a constants-file override in the user config file.

    Args:
        path: Constants file to use for future runs
    """
    CONFIG_DIR.mkdir(parents=True, exist_ok=True)
    with open(CONFIG_FILE, "w") as f:
        f.write(f"{CONSTANTS_ENV_VAR}={Path(path).resolve()}\n")
    CONFIG_FILE.chmod(0o600)


def load_constants(path: Path | None = None) -> CalibratedConstants:
    """Load and validate the calibrated constants.

    Args:
        path: Explicit file; defaults to :func:`get_constants_path`

    Returns:
        Validated constants

    Raises:
        ConfigError: If the file is missing or does not match the schema
    """
    path = Path(path) if path is not None else get_constants_path()
    if not path.exists():
        raise ConfigError(
            f"Calibrated constants file not found: {path}\n\n"
            f"Point {CONSTANTS_ENV_VAR} at a valid file or run:\n"
            "   simplex-lab configure PATH"
        )
    try:
        data = json.loads(path.read_text())
        constants = CalibratedConstants.model_validate(data)
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Invalid constants file {path}:\n{e}") from e
    logger.debug("Loaded constants version %s from %s", constants.version, path)
    return constants


class _Options(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Options):
    N: int = 1024
    L: float = Field(default=1.0, gt=0)

    @field_validator("N")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v < 8 or v & (v - 1):
            raise ValueError(f"N must be a power of two >= 8, got {v}")
        return v


class EnsembleConfig(_Options):
    trials: int = Field(default=20, ge=1)
    seed: int = 20240607


class Tolerances(_Options):
    oracle: float = 1e-10
    bht: float = 1e-2
    partition: float = 1e-6
    identity: float = 1e-12
    norm_change: float = 0.10
    chirp_r2: float = 0.95
    chirp_t3_spread: float = 2.0
    model: float = 1e-12
    decay_slope: float = -1.0
    akns: float = 1e-5
    carleson: float = 1e-6


class TreesOptions(_Options):
    n: int = Field(default=4, ge=1, le=8)
    region: RegionParams = Field(default_factory=lambda: RegionParams(c_sep=4, c_comp=4))
    coverage_samples: int = Field(default=20000, ge=0)
    log_span: float = Field(default=8.0, gt=0)


class PartitionOptions(_Options):
    n: int = Field(default=3, ge=2, le=4)
    region: RegionParams = Field(default_factory=lambda: RegionParams(c_sep=4, c_comp=4))
    samples: int = Field(default=10000, ge=1)
    log_span: float = Field(default=6.0, gt=0)
    trunc: int | None = None
    margin: float = Field(default=2.0, ge=1)

    @model_validator(mode="after")
    def _margin_fits(self):
        if self.region.c_comp / self.margin < 1:
            raise ValueError(
                f"margin {self.margin} exceeds the comparability constant {self.region.c_comp}"
            )
        return self


class ApplyOptions(_Options):
    oracle_arities: list[int] = Field(min_length=1, default_factory=lambda: [2, 3])
    oracle_sizes: list[int] = Field(min_length=1, default_factory=lambda: [16, 32])
    oracle_trials: int = Field(default=50, ge=1)
    bht_size: int = 4096
    bht_trials: int = Field(default=20, ge=1)
    band: int = Field(default=6, ge=1)


class NormScanOptions(_Options):
    arities: list[int] = Field(min_length=1, default_factory=lambda: [2, 3])
    sizes: list[int] = Field(min_length=1, default_factory=lambda: [1024, 8192])
    trials: int = Field(default=100, ge=1)
    band: int = Field(default=8, ge=1)


class ChirpOptions(_Options):
    window_exponents: list[int] = Field(min_length=1, default_factory=lambda: list(range(4, 13)))
    grid_factor: int = Field(default=2, ge=2)
    bi_carleson: bool = False


class TilesOptions(_Options):
    scales: list[int] = Field(min_length=1, default_factory=lambda: [3, 5, 7])
    rank1_scales: list[int] = Field(min_length=1, default_factory=lambda: [1, 3, 5, 7, 9])
    offsets: list[int] = Field(min_length=1, default_factory=lambda: [0, 8, 12])
    max_tiles: int = Field(default=256, ge=1)
    rank1_constant: float = Field(default=32.0, gt=1)
    sparse_constant: float = Field(default=2.0, gt=1)
    host_N: int = 4096
    scale_gap: int = Field(default=4, ge=0)
    smoothness: int = Field(default=6, ge=2)
    alpha_samples: int = Field(default=1, ge=1)


class AuditOptions(_Options):
    instances: int = Field(default=200, ge=1)
    scales: list[int] = Field(min_length=1, default_factory=lambda: [1, 3, 5, 7])
    density: float = Field(default=0.5, gt=0, le=1)
    tile_counts: list[int] = Field(min_length=1, default_factory=lambda: [16, 64])
    energy_trials: int = Field(default=100, ge=1)
    host_N: int = 4096
    smoothness: int = Field(default=6, ge=2)


class BesselOptions(_Options):
    k1: int = 1
    k2_values: list[int] = Field(min_length=1, default_factory=lambda: list(range(4, 10)))
    trials: int = Field(default=4, ge=1)
    smoothness: int = Field(default=6, ge=2)
    scales: list[int] = Field(min_length=1, default_factory=lambda: [0, 1, 2])


class AknsOptions(_Options):
    diagonal: list[float] = Field(min_length=1, default_factory=lambda: [2.0, 1.0, 0.0])
    lambdas: int = Field(default=32, ge=1)
    lambda_max: float = Field(default=40.0, gt=0)
    band: int = Field(default=16, ge=1)
    trials: int = Field(default=4, ge=1)
    grid: GridConfig = Field(default_factory=lambda: GridConfig(N=1024, L=16.0))


class SelfcheckOptions(_Options):
    quick: bool = False


Subcommand = Literal[
    "trees", "partition", "apply", "norm-scan", "chirp", "tiles", "audit", "bessel", "akns",
    "selfcheck",
]


class ExperimentConfig(_Options):
    """Schema of an experiment run; unknown keys are rejected."""

    subcommand: Subcommand
    grid: GridConfig = Field(default_factory=GridConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    output_dir: Path = Path("outputs")
    check: bool = False
    tolerances: Tolerances = Field(default_factory=Tolerances)
    trees: TreesOptions = Field(default_factory=TreesOptions)
    partition: PartitionOptions = Field(default_factory=PartitionOptions)
    apply: ApplyOptions = Field(default_factory=ApplyOptions)
    norm_scan: NormScanOptions = Field(default_factory=NormScanOptions)
    chirp: ChirpOptions = Field(default_factory=ChirpOptions)
    tiles: TilesOptions = Field(default_factory=TilesOptions)
    audit: AuditOptions = Field(default_factory=AuditOptions)
    bessel: BesselOptions = Field(default_factory=BesselOptions)
    akns: AknsOptions = Field(default_factory=AknsOptions)
    selfcheck: SelfcheckOptions = Field(default_factory=SelfcheckOptions)


def load_experiment_config(path: Path, **overrides) -> ExperimentConfig:
    """Read and validate an experiment config file.

    Args:
        path: JSON file following the ExperimentConfig schema
        **overrides: Keys that replace values from the file; mappings merge into
            the option block of the same name and None values are ignored

    Returns:
        Validated config

    Raises:
        ConfigError: With the pydantic diagnostics when validation fails
    """
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return build_experiment_config(merge_overrides(data, overrides))


def build_experiment_config(data: dict) -> ExperimentConfig:
    """Validate a config mapping, translating schema errors to ConfigError."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config:\n{e}") from e


def merge_overrides(data: dict, overrides: dict) -> dict:
    """Copy of ``data`` with non-None overrides applied, merging nested mappings."""
    merged = dict(data)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_overrides(merged[key], value)
        elif isinstance(value, dict):
            merged[key] = {k: v for k, v in value.items() if v is not None}
        else:
            merged[key] = value
    return merged
