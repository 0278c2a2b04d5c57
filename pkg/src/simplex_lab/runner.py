# src/simplex_lab/runner.py
"""Experiment runner: dispatch, artifacts, manifest and exit codes"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from simplex_lab import __version__
from simplex_lab.config import (
    CalibratedConstants,
    ExperimentConfig,
    get_constants_path,
    load_constants,
)
from simplex_lab.errors import SimplexLabError
from simplex_lab.experiments import (
    ExperimentResult,
    run_akns,
    run_apply,
    run_audit,
    run_bessel,
    run_chirp,
    run_norm_scan,
    run_partition,
    run_selfcheck,
    run_tiles,
    run_trees,
)
from simplex_lab.visualization.plotter import create_sweep_plot

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1


@dataclass
class RunOutcome:
    exit_code: int
    result: ExperimentResult | None = None
    artifacts: list[Path] = field(default_factory=list)
    error: str | None = None


def _plain(value):
    """JSON-compatible copy of numpy scalars, arrays and non-finite floats."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, complex):
        return {"real": _plain(value.real), "imag": _plain(value.imag)}
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _cell(value) -> str:
    value = _plain(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: list[dict], path: Path) -> Path:
    """Header row plus one line per row; columns are the union of keys in first-seen order."""
    fieldnames: list[str] = []
    for row in rows:
        fieldnames.extend(k for k in row if k not in fieldnames)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return path


def write_json(data: dict, path: Path) -> Path:
    with open(path, "w") as f:
        json.dump(_plain(data), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def config_digest(config: ExperimentConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode()).hexdigest()


class ExperimentRunner:
    """Runs one subcommand of an ExperimentConfig and writes its artifacts.

    Artifacts land in ``config.output_dir``: ``<name>.csv`` with the rows,
    ``<name>.json`` with checks and metadata, ``<name>.svg`` for sweeps and a
    ``manifest.json`` recording the config hash, the constants version and
    the wall time.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        constants: CalibratedConstants | None = None,
        constants_path: Path | None = None,
    ):
        self.config = config
        self.constants_path = constants_path or get_constants_path()
        self._constants = constants

    @property
    def constants(self) -> CalibratedConstants:
        if self._constants is None:
            self._constants = load_constants(self.constants_path)
        return self._constants

    def _execute(self, subcommand: str) -> ExperimentResult:
        """Route a subcommand name to its experiment function.

        Raises:
            ValueError: If the subcommand is unknown
        """
        config, constants = self.config, self.constants
        if subcommand == "trees":
            return run_trees(config, constants)
        elif subcommand == "partition":
            return run_partition(config, constants)
        elif subcommand == "apply":
            return run_apply(config, constants)
        elif subcommand == "norm-scan":
            return run_norm_scan(config, constants)
        elif subcommand == "chirp":
            return run_chirp(config, constants)
        elif subcommand == "tiles":
            return run_tiles(config, constants)
        elif subcommand == "audit":
            return run_audit(config, constants)
        elif subcommand == "bessel":
            return run_bessel(config, constants)
        elif subcommand == "akns":
            return run_akns(config, constants)
        elif subcommand == "selfcheck":
            return run_selfcheck(config, constants)
        else:
            raise ValueError(f"Unknown subcommand: {subcommand}")

    def write_artifacts(self, result: ExperimentResult, wall_time: float) -> list[Path]:
        out = Path(self.config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        artifacts = [
            write_csv(result.rows, out / f"{result.name}.csv"),
            write_json(
                {
                    "name": result.name,
                    "passed": result.passed,
                    "checks": result.checks,
                    "metadata": result.metadata,
                },
                out / f"{result.name}.json",
            ),
        ]
        if result.plot:
            svg = out / f"{result.name}.svg"
            plotted = create_sweep_plot(output_path=str(svg), **result.plot)
            if "error" in plotted:
                logger.warning("No figure for %s: %s", result.name, plotted["error"])
            else:
                artifacts.append(svg)

        manifest = {
            "subcommand": self.config.subcommand,
            "version": __version__,
            "config_sha256": config_digest(self.config),
            "config": self.config.model_dump(mode="json"),
            "constants_version": self.constants.version,
            "constants_file": str(self.constants_path),
            "wall_time_seconds": wall_time,
            "passed": result.passed,
            "artifacts": [p.name for p in artifacts],
        }
        artifacts.append(write_json(manifest, out / "manifest.json"))
        return artifacts

    def run(self) -> RunOutcome:
        """Run the configured subcommand.

        Returns:
            Outcome whose exit code is 0 on success, 1 when ``check`` is set
            and an acceptance check failed, 2 for configuration errors and 3
            for numerical guard errors
        """
        subcommand = self.config.subcommand
        start = time.perf_counter()
        try:
            result = self._execute(subcommand)
            artifacts = self.write_artifacts(result, time.perf_counter() - start)
        except SimplexLabError as e:
            logger.error("%s failed: %s", subcommand, e)
            return RunOutcome(e.exit_code, error=str(e))

        failed = sorted(name for name, ok in result.checks.items() if not ok)
        if failed:
            logger.warning("%s: failed checks %s", subcommand, ", ".join(failed))
        code = EXIT_CHECK_FAILED if self.config.check and failed else EXIT_OK
        return RunOutcome(code, result, artifacts)
