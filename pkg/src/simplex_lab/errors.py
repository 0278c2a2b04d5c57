# src/simplex_lab/errors.py
"""Exception hierarchy shared by every simplex_lab module.

Each class carries the process exit code the experiment runner reports when
the error escapes an experiment.
"""

from __future__ import annotations

from typing import Any


class SimplexLabError(Exception):
    """Base class for all errors raised by simplex_lab."""

    exit_code = 3


class ConfigError(SimplexLabError, ValueError):
    """Experiment configuration or constants file failed validation."""

    exit_code = 2


class GridError(SimplexLabError, ValueError):
    """Invalid grid construction or mismatched grids."""


class AliasingError(GridError):
    """Requested band does not fit below the Nyquist frequency."""


class DomainError(SimplexLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ContractError(SimplexLabError, ValueError):
    """Precondition of an operation is violated."""


class PlanError(ContractError):
    """Malformed separable evaluation plan."""


class GeometryError(SimplexLabError):
    """Covering search exhausted its scale window."""


class SizeGuardError(SimplexLabError):
    """Combinatorial size exceeds the supported range."""


class WorkBudgetError(SimplexLabError):
    """Requested evaluation exceeds the configured work budget."""


class ResolutionError(SimplexLabError, ValueError):
    """Tile does not resolve on the host grid."""


class CoverageError(SimplexLabError):
    """Region constants leave part of the simplex uncovered.

    Attributes:
        uncovered: Sample gap vectors that fell in no region.
    """

    def __init__(self, message: str, uncovered: list[Any] | None = None):
        super().__init__(message)
        self.uncovered = uncovered or []


class ToleranceError(SimplexLabError):
    """Integrator could not meet the requested tolerance.

    Attributes:
        achieved: Best error estimate reached before giving up.
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved
