# src/simplex_lab/cli.py
"""Command-line interface for the simplex multiplier lab"""

import logging
import sys
from pathlib import Path
from typing import Annotated

import cyclopts
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn

from simplex_lab.config import (
    CONFIG_FILE,
    build_experiment_config,
    load_constants,
    load_experiment_config,
    merge_overrides,
    save_constants_path,
)
from simplex_lab.errors import ConfigError
from simplex_lab.runner import ExperimentRunner, RunOutcome

console = Console()
app = cyclopts.App(
    name="simplex-lab",
    help="Simplex Multiplier Lab - experiments on multilinear simplex operators",
)

ConfigPath = Annotated[
    Path | None, cyclopts.Parameter(help="JSON experiment config; flags override its values")
]
OutputDir = Annotated[Path | None, cyclopts.Parameter(help="Directory for CSV/JSON/SVG output")]
Seed = Annotated[int | None, cyclopts.Parameter(help="Ensemble seed")]
Trials = Annotated[int | None, cyclopts.Parameter(help="Number of random trials")]
Check = Annotated[bool, cyclopts.Parameter(help="Exit with status 1 when a check fails")]
Verbose = Annotated[bool, cyclopts.Parameter(help="Log debug messages")]


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=verbose)],
        force=True,
    )


def _report(outcome: RunOutcome) -> None:
    if outcome.result is None:
        console.print(f"\n[bold red]✗ Failed:[/bold red] {outcome.error}\n")
        return
    for name, ok in outcome.result.checks.items():
        mark = "[green]✓[/green]" if ok else "[red]✗[/red]"
        console.print(f"  {mark} {name}")
    if outcome.result.passed:
        console.print("\n[bold green]✓ Complete![/bold green]\n")
    else:
        console.print("\n[bold yellow]⚠ Complete with failed checks[/bold yellow]\n")
    for path in outcome.artifacts:
        console.print(f"[blue]📄 Saved:[/blue] {path}")


def run_subcommand(
    subcommand: str,
    config: Path | None = None,
    *,
    output_dir: Path | None = None,
    seed: int | None = None,
    check: bool = False,
    verbose: bool = False,
    **blocks: dict,
) -> RunOutcome:
    """
    Build the config for one subcommand, run it and print a summary.

    Args:
        subcommand: Subcommand name, e.g. "chirp"
        config: Optional JSON config file
        output_dir: Override of the output directory
        seed: Override of the ensemble seed
        check: Turn failed acceptance checks into exit status 1
        verbose: Log at DEBUG level
        **blocks: Option-block overrides keyed by block name

    Returns:
        Run outcome carrying the process exit status
    """
    setup_logging(verbose)
    overrides = {
        "subcommand": subcommand,
        "output_dir": str(output_dir) if output_dir else None,
        "ensemble": {"seed": seed},
        "check": check or None,
        **blocks,
    }
    try:
        if config is not None:
            experiment = load_experiment_config(config, **overrides)
        else:
            experiment = build_experiment_config(merge_overrides({}, overrides))
    except ConfigError as e:
        console.print(f"[bold red]Configuration error:[/bold red]\n{e}")
        return RunOutcome(e.exit_code, error=str(e))

    console.print(
        Panel.fit(
            f"[bold cyan]{subcommand}[/bold cyan]\n"
            f"Seed: {experiment.ensemble.seed}\n"
            f"Output: {experiment.output_dir}",
            border_style="cyan",
        )
    )
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
    ) as progress:
        progress.add_task(f"[cyan]Running {subcommand}...", total=None)
        outcome = ExperimentRunner(experiment).run()

    _report(outcome)
    return outcome


def trees(
    *,
    n: Annotated[int | None, cyclopts.Parameter(help="Number of leaves (1-8)")] = None,
    samples: Annotated[int | None, cyclopts.Parameter(help="Coverage samples")] = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    Enumerate the rooted trees with n leaves and sample region coverage.

    Examples:
        simplex-lab trees --n 4
    """
    outcome = run_subcommand(
        "trees", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        trees={"n": n, "coverage_samples": samples},
    )
    if outcome.result is not None:
        metadata = outcome.result.metadata
        console.print(f"\n[bold]{metadata['count']}[/bold] trees with {metadata['n']} leaves")
        for row in outcome.result.rows:
            console.print(f"  {row['tree']}")
    return outcome.exit_code


def partition(
    *,
    n: Annotated[int | None, cyclopts.Parameter(help="Number of frequencies (2-4)")] = None,
    samples: Annotated[int | None, cyclopts.Parameter(help="Sampled simplex points")] = None,
    trunc: Annotated[int | None, cyclopts.Parameter(help="Fourier truncation per cube")] = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    Telescoping partition of the simplex indicator over all trees.

    Examples:
        simplex-lab partition --n 3 --samples 10000
    """
    return run_subcommand(
        "partition", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        partition={"n": n, "samples": samples, "trunc": trunc},
    ).exit_code


def apply(
    *,
    trials: Trials = None,
    bht_size: Annotated[int | None, cyclopts.Parameter(help="Grid size of the BHT check")] = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    Simplex operators against brute force, maximal variants and the BHT kernel.

    Examples:
        simplex-lab apply --trials 10
    """
    return run_subcommand(
        "apply", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        apply={"oracle_trials": trials, "bht_size": bht_size},
    ).exit_code


def norm_scan(
    *,
    trials: Trials = None,
    sizes: Annotated[list[int] | None, cyclopts.Parameter(help="Grid sizes to compare")] = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    Hoelder ratios of T2 and T3 under grid refinement.

    Examples:
        simplex-lab norm-scan --sizes 1024 --sizes 8192
    """
    return run_subcommand(
        "norm-scan", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        norm_scan={"trials": trials, "sizes": sizes},
    ).exit_code


def chirp(
    *,
    nmax: Annotated[int | None, cyclopts.Parameter(help="Largest window size W")] = None,
    bi_carleson: Annotated[
        bool, cyclopts.Parameter(help="Also report the maximal bilinear operators")
    ] = False,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    T3 against the alternating T3 on truncated chirps, with a log fit.

    Examples:
        simplex-lab chirp --nmax 4096
    """
    exponents = None
    if nmax is not None:
        if nmax < 16 or nmax & (nmax - 1):
            console.print(f"[bold red]Configuration error:[/bold red] --nmax {nmax}")
            return ConfigError.exit_code
        exponents = list(range(4, nmax.bit_length()))
    return run_subcommand(
        "chirp", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        chirp={"window_exponents": exponents, "bi_carleson": bi_carleson or None},
    ).exit_code


def tiles(
    *,
    max_tiles: Annotated[int | None, cyclopts.Parameter(help="Vector tiles to generate")] = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    Rank-1 lacunary tiles and model operators against hand expansions.

    Examples:
        simplex-lab tiles --max-tiles 256
    """
    return run_subcommand(
        "tiles", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        tiles={"max_tiles": max_tiles},
    ).exit_code


def audit(
    *,
    instances: Annotated[int | None, cyclopts.Parameter(help="Random instances")] = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    Size, energy, interpolation and stratification ensembles.

    Examples:
        simplex-lab audit --instances 50
    """
    return run_subcommand(
        "audit", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        audit={"instances": instances},
    ).exit_code


def bessel(
    *,
    k1: Annotated[int | None, cyclopts.Parameter(help="Scale of the near pair")] = None,
    trials: Trials = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    Decay of Bessel sums between separated tile pairs.

    Examples:
        simplex-lab bessel --k1 1
    """
    return run_subcommand(
        "bessel", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        bessel={"k1": k1, "trials": trials},
    ).exit_code


def akns(
    *,
    lambdas: Annotated[int | None, cyclopts.Parameter(help="Points of the lambda grid")] = None,
    lambda_max: Annotated[float | None, cyclopts.Parameter(help="Largest lambda")] = None,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = False,
    verbose: Verbose = False,
) -> int:
    """
    AKNS closed forms, the Carleson bound sweep and the phase conditions.

    Examples:
        simplex-lab akns --lambdas 32
    """
    return run_subcommand(
        "akns", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        akns={"lambdas": lambdas, "lambda_max": lambda_max},
    ).exit_code


def selfcheck(
    *,
    quick: Annotated[bool, cyclopts.Parameter(help="Reduced sizes for a fast run")] = False,
    config: ConfigPath = None,
    output_dir: OutputDir = None,
    seed: Seed = None,
    check: Check = True,
    verbose: Verbose = False,
) -> int:
    """
    Run every acceptance criterion and aggregate pass/fail.

    Examples:
        simplex-lab selfcheck
        simplex-lab selfcheck --quick
    """
    return run_subcommand(
        "selfcheck", config, output_dir=output_dir, seed=seed, check=check, verbose=verbose,
        selfcheck={"quick": quick or None},
    ).exit_code


def configure(path: Path):
    """
    Use a calibrated constants file for future runs.

    Saves the path to ~/.config/simplex-lab/config.env.

    Examples:
        simplex-lab configure constants.json
    """
    try:
        constants = load_constants(path)
    except ConfigError as e:
        console.print(f"[red]✗[/red] {e}\n")
        return e.exit_code
    save_constants_path(path)
    console.print(
        Panel.fit(
            f"[bold green]Constants version {constants.version}[/bold green]\n\n"
            f"Saved to: {CONFIG_FILE}\n"
            "Permissions set to 600 (owner read/write only)",
            border_style="green",
        )
    )
    return 0


# Register commands
app.command(configure, name="configure")
app.command(trees, name="trees")
app.command(partition, name="partition")
app.command(apply, name="apply")
app.command(norm_scan, name="norm-scan")
app.command(chirp, name="chirp")
app.command(tiles, name="tiles")
app.command(audit, name="audit")
app.command(bessel, name="bessel")
app.command(akns, name="akns")
app.command(selfcheck, name="selfcheck")


def main():
    """Entry point for the CLI"""
    code = app()
    if isinstance(code, int) and code:
        sys.exit(code)


if __name__ == "__main__":
    main()
