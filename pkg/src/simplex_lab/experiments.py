# src/simplex_lab/experiments.py
"""One function per subcommand.

Each experiment reads its option block from an ExperimentConfig, runs the
numerical code in ``simplex_lab.tools`` and returns an ExperimentResult: the
CSV rows, named pass/fail checks against the configured tolerances and
frozen constants, free-form metadata and an optional sweep plot.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from simplex_lab.config import CalibratedConstants, ExperimentConfig
from simplex_lab.tools.akns_lab import (
    AknsSystem,
    carleson_bound_check,
    closed_form_2x2,
    closed_form_3x3,
    nondegeneracy,
    picard_check,
    potential_from_grid,
    reduction_phases,
    solve,
)
from simplex_lab.tools.grid_core import (
    Chirp,
    GridFunction,
    RandomBandlimited,
    critical_chirp_period,
    dft,
    from_preset,
    lp_quasinorm,
    window,
)
from simplex_lab.tools.multiplier_ops import (
    SimplexOpSpec,
    bht_frequency,
    bht_kernel,
    hoelder_ratio,
    maximal_apply,
    simplex_apply,
)
from simplex_lab.tools.simplex_trees import (
    MAX_COVERAGE,
    RootedTree,
    coverage_report,
    enumerate_trees,
    membership_from_gaps,
    star_tree,
)
from simplex_lab.tools.size_energy import (
    delicate_decay_probe,
    energy_l2_check,
    random_sequence,
    size,
    size_jn,
    stratify,
    tool_check,
    verify_stratification,
)
from simplex_lab.tools.statistics import ensemble_summary, linear_fit, relative_change, spread_ratio
from simplex_lab.tools.symbol_factory import evaluate, sample_simplex, telescope
from simplex_lab.tools.tile_model import (
    TileCollection,
    host_grid_for,
    lacunary_family,
    make_wave_packet,
    model_apply,
    model_form,
    rank1_check,
)

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """Rows for the CSV file, named checks and what the plotter needs."""

    name: str
    rows: list[dict]
    checks: dict[str, bool] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    plot: dict | None = None

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass(frozen=True)
class _Separation:
    """Bare (c_sep, c_comp) pair; RegionParams refuses c_comp = 1."""

    c_sep: float
    c_comp: float


def schroeder_numbers(n_max: int) -> list[int]:
    """Little Schroeder numbers s_1..s_n_max from their three-term recurrence."""
    s = [0, 1, 1]
    for n in range(2, n_max):
        value = 3 * (2 * n - 1) * s[n] - (n - 2) * s[n - 1]
        s.append(value // (n + 1))
    return s[1 : n_max + 1]


def brute_force_simplex(fs: list[GridFunction]) -> GridFunction:
    """Sum over every strictly increasing frequency tuple, O(N^n) terms."""
    N, L = fs[0].N, fs[0].period
    spectra = [dft(f).coefficients for f in fs]
    combos = np.array(list(itertools.combinations(range(N), len(fs))), dtype=np.int64)
    weights = np.ones(len(combos), dtype=np.complex128)
    for j, coefficients in enumerate(spectra):
        weights = weights * coefficients[combos[:, j]]
    output_frequency = (combos - N // 2).sum(axis=1)
    m = np.arange(N)
    phases = np.exp(2j * np.pi * ((np.outer(m, output_frequency)) % N) / N)
    return GridFunction(phases @ weights, L)


def _relative_error(value: GridFunction, reference: GridFunction) -> float:
    scale = lp_quasinorm(reference, 2)
    difference = lp_quasinorm(value - reference, 2)
    if scale == 0:
        return 0.0 if difference == 0 else math.inf
    return difference / scale


def _band_limited(band: int, seed: int, N: int, L: float) -> GridFunction:
    return from_preset(RandomBandlimited(band=band, seed=seed), N, L)


def _noise(N: int, L: float, seed: int) -> GridFunction:
    rng = np.random.default_rng(seed)
    return GridFunction(rng.standard_normal(N) + 1j * rng.standard_normal(N), L)


def run_trees(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    opts = config.trees
    trees = enumerate_trees(opts.n)
    hits: dict[str, int] = {}
    metadata: dict = {"n": opts.n, "count": len(trees)}
    if opts.coverage_samples and opts.n <= MAX_COVERAGE:
        report = coverage_report(
            opts.n,
            opts.region,
            opts.coverage_samples,
            config.ensemble.seed,
            log_span=opts.log_span,
        )
        hits = report.hits
        metadata["coverage"] = {
            "samples": report.samples,
            "uncovered_fraction": report.uncovered_fraction,
            "multiplicity": report.multiplicity,
            "uncovered_points": report.uncovered_points,
        }
    rows = [
        {
            "tree_id": i,
            "tree": str(G),
            "degree_sequence": " ".join(str(d) for d in G.degree_sequence),
            "height": G.height,
            "hits": hits.get(str(G), ""),
        }
        for i, G in enumerate(trees)
    ]

    top = max(6, opts.n)
    expected = schroeder_numbers(top)
    counts = [len(enumerate_trees(k)) for k in range(1, top + 1)]
    metadata["counts"] = dict(zip(range(1, top + 1), counts))
    checks = {
        "enumeration": counts == expected,
        "small_cases": counts[1] == 1 and counts[2] == 3,
    }
    if "coverage" in metadata:
        checks["coverage"] = metadata["coverage"]["uncovered_fraction"] == 0
    logger.info("trees n=%d: %d trees", opts.n, len(trees))
    return ExperimentResult("trees", rows, checks, metadata)


def run_partition(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Telescoping decomposition of the simplex indicator, checked at sampled points.

    The partition-of-unity check uses only points that stay inside some
    region after both region ratios are tightened by ``margin``.
    """
    opts = config.partition
    seed = config.ensemble.seed
    decomposition = telescope(
        opts.n,
        None,
        opts.region,
        opts.trunc,
        coverage_samples=opts.samples,
        seed=seed,
        log_span=opts.log_span,
    )
    xi = sample_simplex(opts.n, opts.samples, seed + 1, opts.log_span)
    gaps = np.diff(xi, axis=1)
    tight = _Separation(opts.region.c_sep * opts.margin, opts.region.c_comp / opts.margin)

    interior = np.zeros(len(xi), dtype=bool)
    rows = []
    for G, symbol, summand in zip(
        decomposition.trees, decomposition.symbols, decomposition.summands
    ):
        member = membership_from_gaps(G, gaps, opts.region)
        deep = membership_from_gaps(G, gaps, tight)
        interior |= deep
        symbol_values = np.real(evaluate(symbol, xi))
        summand_values = np.real(evaluate(summand, xi))
        rows.append(
            {
                "tree": str(G),
                "region_hits": int(member.sum()),
                "interior_hits": int(deep.sum()),
                "symbol_one_on_interior": bool(np.all(np.abs(symbol_values[deep] - 1) < 1e-9)),
                "summand_mean": float(summand_values.mean()),
                "summand_max": float(summand_values.max()),
            }
        )

    total = decomposition.total(xi)
    residual = float(np.max(np.abs(total[interior] - 1))) if interior.any() else math.inf
    identity = decomposition.identity_defect(xi)
    tol = config.tolerances
    metadata = {
        "n": opts.n,
        "samples": opts.samples,
        "interior_samples": int(interior.sum()),
        "margin": opts.margin,
        "trunc": opts.trunc,
        "max_partition_residual": residual,
        "identity_defect": identity,
        "region": opts.region.model_dump(),
    }
    checks = {"partition": residual < tol.partition, "identity": identity <= tol.identity}
    logger.info("partition n=%d: residual %.3g, identity defect %.3g", opts.n, residual, identity)
    return ExperimentResult("partition", rows, checks, metadata)


def run_apply(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Simplex operator against the brute-force sum, and the BHT kernel against its symbol."""
    opts = config.apply
    seed = config.ensemble.seed
    L = config.grid.L
    rows = []
    oracle_errors = []
    dominated = True
    for n in opts.oracle_arities:
        spec = SimplexOpSpec(n=n)
        for N in opts.oracle_sizes:
            for trial in range(opts.oracle_trials):
                fs = [_noise(N, L, seed + 7919 * trial + 101 * j + N) for j in range(n)]
                value = simplex_apply(spec, fs)
                error = _relative_error(value, brute_force_simplex(fs))
                sup = maximal_apply(spec, fs)
                dominated &= bool(np.all(sup.samples.real >= np.abs(value.samples) - 1e-9))
                oracle_errors.append(error)
                rows.append({"kind": "oracle", "n": n, "N": N, "trial": trial, "error": error})

    bht_errors = []
    for trial in range(opts.bht_trials):
        f1 = _band_limited(opts.band, seed + 2 * trial, opts.bht_size, L)
        f2 = _band_limited(opts.band, seed + 2 * trial + 1, opts.bht_size, L)
        kernel = bht_kernel(f1, f2)
        error = _relative_error(kernel.output, bht_frequency(f1, f2))
        bht_errors.append(error)
        rows.append({"kind": "bht", "n": 2, "N": opts.bht_size, "trial": trial, "error": error})

    tol = config.tolerances
    metadata = {
        "oracle": ensemble_summary(oracle_errors, "oracle_error"),
        "bht": ensemble_summary(bht_errors, "bht_error"),
    }
    checks = {
        "oracle": max(oracle_errors) <= tol.oracle,
        "maximal_dominates": dominated,
        "bht": max(bht_errors) <= tol.bht,
    }
    return ExperimentResult("apply", rows, checks, metadata)


def run_norm_scan(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Largest Hoelder ratio over band-limited inputs as the grid is refined."""
    opts = config.norm_scan
    seed = config.ensemble.seed
    L = config.grid.L
    rows = []
    series = {}
    changes = {}
    for n in opts.arities:
        spec = SimplexOpSpec(n=n)
        maxima = []
        for N in opts.sizes:
            ratios = [
                hoelder_ratio(
                    spec, [_band_limited(opts.band, seed + 1000 * t + j, N, L) for j in range(n)]
                )
                for t in range(opts.trials)
            ]
            summary = ensemble_summary(ratios, f"T{n} ratio")
            maxima.append(summary["max"])
            rows.append(
                {"n": n, "N": N, "max_ratio": summary["max"], "mean_ratio": summary["mean"]}
            )
        changes[n] = relative_change(maxima[0], maxima[-1])
        series[f"T{n}"] = ([math.log2(N) for N in opts.sizes], maxima)
    metadata = {"relative_change": {str(n): c for n, c in changes.items()}, "band": opts.band}
    checks = {
        f"stable_T{n}": change < config.tolerances.norm_change for n, change in changes.items()
    }
    plot = {
        "series": series,
        "title": "Hoelder ratio under grid refinement",
        "xlabel": "log2 N",
        "ylabel": "max ratio",
    }
    return ExperimentResult("norm-scan", rows, checks, metadata, plot)


def _bi_carleson_ratio(alpha: tuple[float, float], f1: GridFunction, f2: GridFunction) -> float:
    spec = SimplexOpSpec(n=2, alpha=alpha, maximal=True)
    norms = lp_quasinorm(f1, 2) * lp_quasinorm(f2, 2)
    return lp_quasinorm(maximal_apply(spec, [f1, f2]), 1) / norms


def run_chirp(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """
    Normalized quasinorm ratios of T3 and the alternating T3 on truncated chirps.

    Window W spans W samples of a grid of grid_factor*W points whose period
    is the critical chirp period, so the chirp always sweeps the whole band.
    """
    opts = config.chirp
    plain = SimplexOpSpec(n=3)
    alternating = SimplexOpSpec.alternating(3)
    rows = []
    for e in sorted(opts.window_exponents):
        W = 2**e
        N = opts.grid_factor * W
        L = critical_chirp_period(N)
        width = W * L / N
        up = window(from_preset(Chirp(sign=1), N, L), width)
        down = window(from_preset(Chirp(sign=-1), N, L), width)
        row = {
            "window": W,
            "N": N,
            "L": L,
            "quasinorm_ratio_t3": hoelder_ratio(plain, [up, down, up]),
            "quasinorm_ratio_t3tilde": hoelder_ratio(alternating, [up, down, up]),
        }
        if opts.bi_carleson:
            row["bi_carleson_degenerate"] = _bi_carleson_ratio((1.0, -1.0), up, down)
            row["bi_carleson_nondegenerate"] = _bi_carleson_ratio((1.0, -2.0), up, down)
        rows.append(row)
        logger.info(
            "chirp window %d: T3 %.4g, T3~ %.4g",
            W,
            row["quasinorm_ratio_t3"],
            row["quasinorm_ratio_t3tilde"],
        )

    log_w = [math.log2(r["window"]) for r in rows]
    tilde = [r["quasinorm_ratio_t3tilde"] for r in rows]
    straight = [r["quasinorm_ratio_t3"] for r in rows]
    fit = linear_fit(log_w, tilde)
    spread = spread_ratio(straight)
    tol = config.tolerances
    checks = {
        "t3tilde_log_growth": bool(fit.get("slope", math.nan) > 0)
        and bool(fit.get("r_squared", 0.0) >= tol.chirp_r2),
        "t3_flat": spread <= tol.chirp_t3_spread,
    }
    series = {"T3": (log_w, straight), "T3 alternating": (log_w, tilde)}
    if opts.bi_carleson:
        series["M2 degenerate"] = (log_w, [r["bi_carleson_degenerate"] for r in rows])
        series["M2 nondegenerate"] = (log_w, [r["bi_carleson_nondegenerate"] for r in rows])
    plot = {
        "series": series,
        "fits": {"T3 alternating": fit},
        "title": "Truncated chirps",
        "xlabel": "log2 W",
        "ylabel": "normalized quasinorm ratio",
    }
    metadata = {"fit": fit, "t3_spread": spread, "grid_factor": opts.grid_factor}
    return ExperimentResult("chirp", rows, checks, metadata, plot)


def _hand_model(coll: TileCollection, fs: list[GridFunction], smoothness: int) -> np.ndarray:
    """sum_P |I_P|^(-1/2) <f_1, Phi_P1> <f_2, Phi_P2> Phi_P3 packet by packet."""
    f = fs[0]
    out = np.zeros(f.N, dtype=np.complex128)
    for P in coll.tiles:
        phi = [make_wave_packet(t, smoothness, f.N, f.period).function for t in P.tiles]
        weight = float(P.time.length) ** -0.5 * fs[0].inner(phi[0]) * fs[1].inner(phi[1])
        out += weight * phi[2].samples
    return out


def _hand_nested(
    outer: TileCollection,
    inner: TileCollection,
    fs: list[GridFunction],
    smoothness: int,
    scale_gap: int,
) -> np.ndarray:
    """The tree ((1 2) 3) expanded by hand: the inner sum keeps |I_Q| >= 2^gap |I_P|."""
    f = fs[0]
    out = np.zeros(f.N, dtype=np.complex128)
    for P in outer.tiles:
        threshold = P.time.length * 2**scale_gap
        kept = TileCollection(tuple(Q for Q in inner.tiles if Q.time.length >= threshold))
        inner_out = f.with_samples(_hand_model(kept, fs[:2], smoothness))
        phi = [make_wave_packet(t, smoothness, f.N, f.period).function for t in P.tiles]
        weight = float(P.time.length) ** -0.5 * inner_out.inner(phi[0]) * fs[2].inner(phi[1])
        out += weight * phi[2].samples
    return out


def run_tiles(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Rank-1 check of the lacunary family and model operators against hand expansions."""
    opts = config.tiles
    seed = config.ensemble.seed
    big = lacunary_family(opts.rank1_scales, opts.offsets, opts.max_tiles, opts.rank1_constant)
    report = rank1_check(big)
    family = lacunary_family(opts.scales, opts.offsets, opts.max_tiles, opts.rank1_constant)
    N, L = host_grid_for([t for P in family.tiles for t in P.tiles], opts.host_N)
    fs = [_noise(N, L, seed + j) for j in range(3)]
    s = opts.smoothness

    rows = []
    star = star_tree(2)
    cases = {
        "single": TileCollection(family.tiles[:1]),
        "small": TileCollection(family.tiles[:8]),
    }
    for case, coll in cases.items():
        model = model_apply(star, {0: coll}, fs[:2], smoothness=s, scale_gap=opts.scale_gap)
        hand = fs[0].with_samples(_hand_model(coll, fs[:2], s))
        rows.append({"case": case, "tiles": len(coll), "error": _relative_error(model, hand)})

    nested = RootedTree.parse("((1 2) 3)")
    outer = TileCollection(family.tiles[-4:])
    inner = TileCollection(family.tiles[:1])
    model = model_apply(nested, {0: outer, 1: inner}, fs, smoothness=s, scale_gap=opts.scale_gap)
    hand = fs[0].with_samples(_hand_nested(outer, inner, fs, s, opts.scale_gap))
    error = _relative_error(model, hand)
    rows.append({"case": "nested", "tiles": len(outer) + len(inner), "error": error})

    form = model_form(
        star,
        {0: family},
        fs[:2],
        fs[2],
        opts.alpha_samples,
        smoothness=s,
        scale_gap=opts.scale_gap,
    )
    metadata = {
        "rank1_tiles": len(big),
        "rank1_violations": report.rows()[:20],
        "model_tiles": len(family),
        "sparse": family.is_sparse(opts.sparse_constant),
        "host_grid": {"N": N, "L": L},
        "model_form": {"real": form.real, "imag": form.imag},
    }
    checks = {
        "rank1": report.ok,
        "sparse": metadata["sparse"],
        **{f"model_{r['case']}": r["error"] <= config.tolerances.model for r in rows},
    }
    return ExperimentResult("tiles", rows, checks, metadata)


def run_audit(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Size, energy, interpolation and stratification ensembles against frozen constants."""
    opts = config.audit
    seed = config.ensemble.seed
    families = {
        count: lacunary_family(opts.scales, (0, 8, 12), count) for count in opts.tile_counts
    }
    thetas = (1 / 3, 1 / 3, 1 / 3)
    rows = []
    tool_by_count: dict[int, list[float]] = {count: [] for count in opts.tile_counts}
    jn_ratios, strat_constants, strat_ok = [], [], True
    for i in range(opts.instances):
        count = opts.tile_counts[i % len(opts.tile_counts)]
        coll = families[count]
        slot = i % 3
        seq = random_sequence(coll, slot, seed + i, opts.density)
        S = size(coll, seq).value
        jn = size_jn(coll, seq)
        if S and jn:
            jn_ratio = max(jn / S, S / jn)
        else:
            jn_ratio = 1.0 if S == jn else math.inf
        strat = stratify(coll, seq)
        problems = verify_stratification(coll, seq, strat)
        strat_ok &= not problems
        seqs = [random_sequence(coll, j, seed + 3 * i + j + opts.instances) for j in range(3)]
        tool = tool_check(coll, seqs, thetas)
        jn_ratios.append(jn_ratio)
        strat_constants.append(strat.c_strat)
        tool_by_count[count].append(tool.ratio)
        rows.append(
            {
                "kind": "instance",
                "index": i,
                "tiles": count,
                "slot": slot,
                "size": S,
                "size_jn": jn,
                "jn_ratio": jn_ratio,
                "tool_ratio": tool.ratio,
                "c_strat": strat.c_strat,
                "strata": len(strat.strata),
                "strat_problems": len(problems),
            }
        )

    largest = families[max(opts.tile_counts)]
    N, L = host_grid_for([t for P in largest.tiles for t in P.tiles], opts.host_N)
    energy_ratios = []
    for trial in range(opts.energy_trials):
        f = _noise(N, L, seed + 10_000 + trial)
        ratio = energy_l2_check(largest, f, trial % 3, opts.smoothness)
        energy_ratios.append(ratio)
        rows.append(
            {
                "kind": "energy",
                "index": trial,
                "tiles": len(largest),
                "slot": trial % 3,
                "energy_ratio": ratio,
            }
        )

    worst_tool = {count: max(values, default=0.0) for count, values in tool_by_count.items()}
    counts = sorted(worst_tool)
    smallest, largest_count = worst_tool[counts[0]], worst_tool[counts[-1]]
    checks = {
        "john_nirenberg": max(jn_ratios) <= constants.c_jn,
        "energy": max(energy_ratios) <= constants.c_cal,
        "tool": max(worst_tool.values()) <= constants.c_tool,
        "tool_growth": largest_count <= 2 * smallest,
        "stratify": strat_ok and max(strat_constants) <= constants.c_strat,
    }
    metadata = {
        "constants_version": constants.version,
        "jn": ensemble_summary(jn_ratios, "jn_ratio"),
        "energy": ensemble_summary(energy_ratios, "energy_ratio"),
        "tool": {str(c): ensemble_summary(v, "tool_ratio") for c, v in tool_by_count.items()},
        "c_strat": ensemble_summary(strat_constants, "c_strat"),
        "tool_growth": largest_count / smallest if smallest else math.inf,
        "host_grid": {"N": N, "L": L},
    }
    return ExperimentResult("audit", rows, checks, metadata)


def run_bessel(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Decay of separated Bessel sums, unit-scale tiles and tiles across ``scales``."""
    opts = config.bessel
    instances = {"unit": [0], "multiscale": opts.scales}
    rows = []
    checks = {}
    series, fits = {}, {}
    metadata: dict = {}
    for offset, (name, scales) in enumerate(instances.items()):
        sums = delicate_decay_probe(
            opts.k1,
            opts.k2_values,
            opts.trials,
            config.ensemble.seed + offset,
            smoothness=opts.smoothness,
            scales=scales,
        )
        rows.extend({"instance": name, **row} for row in sums.rows)
        suffix = "" if name == "unit" else f"_{name}"
        checks[f"decay{suffix}"] = sums.slope <= config.tolerances.decay_slope
        checks[f"bounded{suffix}"] = max(r["value"] for r in sums.rows) <= constants.c_bessel

        finite = [r for r in sums.rows if math.isfinite(r["log2_value"])]
        fit = {"slope": sums.slope, "intercept": math.nan, "r_squared": sums.r_squared}
        if len(finite) >= 2:
            fit = linear_fit([r["k2"] for r in finite], [r["log2_value"] for r in finite])
        label = f"{name}, scales {scales}"
        series[label] = ([r["k2"] for r in finite], [r["log2_value"] for r in finite])
        fits[label] = fit
        metadata[name] = {"slope": sums.slope, "r_squared": sums.r_squared, **sums.metadata}

    plot = {
        "series": series,
        "fits": fits,
        "title": f"Separated Bessel sums, k1 = {opts.k1}",
        "xlabel": "k2",
        "ylabel": "log2 |sum|",
    }
    return ExperimentResult("bessel", rows, checks, metadata, plot)


def run_akns(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Closed forms against the ODE solver, the Carleson bound sweep and the phase conditions."""
    opts = config.akns
    seed = config.ensemble.seed
    N, L = opts.grid.N, opts.grid.L
    d = tuple(opts.diagonal)
    if len(d) < 3:
        d = d + tuple(min(d) - k - 1 for k in range(3 - len(d)))
    rows = []
    agreement = []
    lam = opts.lambda_max / 8
    for trial in range(opts.trials):
        a = [
            potential_from_grid(_band_limited(opts.band, seed + 3 * trial + k, N, L))
            for k in range(3)
        ]
        two = AknsSystem(d[:2], {(1, 2): a[0]}, lam)
        trajectory = solve(two, (0.0, L / 8))
        index = np.linspace(0, trajectory.x.size - 1, 11).astype(int)
        closed = closed_form_2x2(two, trajectory.x[index], 0.0)
        error = float(np.max(np.abs(trajectory.v[0, index] - closed)))
        agreement.append(error)
        rows.append({"kind": "2x2", "trial": trial, "lambda": lam, "error": error})

        three = AknsSystem(d[:3], {(1, 2): a[0], (2, 3): a[1], (1, 3): a[2]}, lam)
        v0 = (0.5, -0.25j, 1.0)
        trajectory = solve(three, (0.0, L / 16), v0=v0)
        index = np.linspace(0, trajectory.x.size - 1, 4).astype(int)[1:]
        closed = np.array([closed_form_3x3(three, x, 0.0, v0) for x in trajectory.x[index]])
        error = float(np.max(np.abs(trajectory.v[0, index] - closed)))
        agreement.append(error)
        rows.append({"kind": "3x3", "trial": trial, "lambda": lam, "error": error})

    f = _band_limited(opts.band, seed, N, L)
    lambdas = np.linspace(opts.lambda_max / opts.lambdas, opts.lambda_max, opts.lambdas)
    sweep = carleson_bound_check(f, (d[0], d[1]), lambdas)
    rows.extend({"kind": "carleson", **row} for row in sweep)

    picard = picard_check(AknsSystem(d[:3], {(1, 2): a[0], (2, 3): a[1]}, lam), (0.0, 1.0))
    degenerate_ok, block = nondegeneracy((1, -1))
    phases = (d[0] - d[1], d[1] - d[2])
    chain_ok, _ = nondegeneracy(phases)
    worst = max(row["ratio"] for row in sweep)
    tol = config.tolerances
    checks = {
        "closed_forms": max(agreement) <= tol.akns,
        "carleson_bound": worst <= 1 + tol.carleson,
        "degenerate_flagged": not degenerate_ok,
        "chain_nondegenerate": chain_ok and nondegeneracy(reduction_phases(d[:3]))[0],
        "picard": picard.ok,
    }
    plot = {
        "series": {"sup |v1| / bound": (lambdas.tolist(), [row["ratio"] for row in sweep])},
        "title": "Carleson bound for the 2x2 system",
        "xlabel": "lambda",
        "ylabel": "ratio",
    }
    metadata = {
        "diagonal": list(d),
        "max_closed_form_error": max(agreement),
        "max_carleson_ratio": worst,
        "degenerate_block": list(block) if block else None,
        "picard": {"order": picard.order, "error": picard.error, "bound": picard.bound},
    }
    return ExperimentResult("akns", rows, checks, metadata, plot)


def _quick(config: ExperimentConfig) -> ExperimentConfig:
    """Reduced sizes of every experiment for a fast smoke run."""
    update = {
        "partition": config.partition.model_copy(update={"samples": 2000}),
        "apply": config.apply.model_copy(
            update={"oracle_trials": 5, "bht_trials": 3, "bht_size": 1024}
        ),
        "norm_scan": config.norm_scan.model_copy(update={"trials": 10, "sizes": [1024, 2048]}),
        "chirp": config.chirp.model_copy(update={"window_exponents": list(range(4, 10))}),
        "tiles": config.tiles.model_copy(update={"rank1_scales": [1, 3, 5, 7]}),
        "audit": config.audit.model_copy(update={"instances": 20, "energy_trials": 10}),
        "bessel": config.bessel.model_copy(update={"trials": 1}),
        "akns": config.akns.model_copy(update={"lambdas": 8, "trials": 1}),
    }
    return config.model_copy(update=update)


ACCEPTANCE: list[tuple[int, str, str, tuple[str, ...]]] = [
    (1, "oracle equivalence", "apply", ("oracle",)),
    (2, "tree enumeration", "trees", ("enumeration", "small_cases")),
    (3, "partition of unity", "partition", ("partition", "identity")),
    (4, "Hoelder-ratio stability", "norm-scan", ()),
    (5, "chirp dichotomy", "chirp", ("t3tilde_log_growth", "t3_flat")),
    (6, "BHT kernel agreement", "apply", ("bht",)),
    (7, "model-operator consistency", "tiles", ("rank1", "model_single", "model_small")),
    (8, "size/energy suite", "audit", ("john_nirenberg", "energy", "tool", "tool_growth",
                                       "stratify")),
    (9, "delicate Bessel decay", "bessel", ("decay", "decay_multiscale")),
    (10, "AKNS", "akns", ("closed_forms", "carleson_bound", "degenerate_flagged",
                          "chain_nondegenerate")),
]


def run_selfcheck(config: ExperimentConfig, constants: CalibratedConstants) -> ExperimentResult:
    """Run every acceptance criterion and aggregate pass/fail."""
    config = _quick(config) if config.selfcheck.quick else config
    config = config.model_copy(update={"trees": config.trees.model_copy(update={"n": 6})})
    cache: dict[str, ExperimentResult] = {}
    timings: dict[str, float] = {}
    rows = []
    for number, title, name, keys in ACCEPTANCE:
        if name not in cache:
            start = time.perf_counter()
            cache[name] = EXPERIMENTS[name](config, constants)
            timings[name] = time.perf_counter() - start
        result = cache[name]
        selected = {k: v for k, v in result.checks.items() if not keys or k in keys}
        failed = sorted(k for k, v in selected.items() if not v)
        rows.append(
            {
                "criterion": number,
                "name": title,
                "experiment": name,
                "passed": not failed,
                "failed_checks": " ".join(failed),
            }
        )
        logger.info("criterion %d (%s): %s", number, title, "pass" if not failed else "FAIL")
    checks = {f"criterion_{row['criterion']}": row["passed"] for row in rows}
    metadata = {"quick": config.selfcheck.quick, "seconds": timings}
    return ExperimentResult("selfcheck", rows, checks, metadata)


EXPERIMENTS: dict[str, Callable[[ExperimentConfig, CalibratedConstants], ExperimentResult]] = {
    "trees": run_trees,
    "partition": run_partition,
    "apply": run_apply,
    "norm-scan": run_norm_scan,
    "chirp": run_chirp,
    "tiles": run_tiles,
    "audit": run_audit,
    "bessel": run_bessel,
    "akns": run_akns,
    "selfcheck": run_selfcheck,
}
