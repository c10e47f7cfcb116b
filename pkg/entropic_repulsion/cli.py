"""Command-line entry point: rate tables, tail laws, Monte Carlo checks and the detour scan.

Every command writes its artifacts first and a run manifest (<out>.manifest.json) last.
"""
from __future__ import annotations

import argparse
from collections.abc import Callable
import csv
from dataclasses import asdict, dataclass
import json
import logging
from pathlib import Path
import sys
import time
from typing import Any, Optional

import numpy as np
import voluptuous as vol

from . import __version__
from .config import (
    DETOUR_SCHEMA,
    MC_SCHEMA,
    RATE_TABLE_SCHEMA,
    TAIL_SCHEMA,
    load_tolerances,
    parse_overrides,
    validate_parameters,
)
from .const import (
    DETOUR_HEADER,
    EXIT_CHECK_FAILED,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_USAGE,
    TAIL_HEADER,
)
from .DTO.McResultDTO import McResultDTO
from .DTO.RunManifestDTO import RunManifestDTO
from .DTO.TolerancesDTO import TolerancesDTO
from .exceptions import (
    ContractError,
    DomainError,
    InfeasibleSimulationError,
    RangeError,
    SimulationError,
    SolverError,
)
from .measures import DensityGrid, mean, mu_bullet_closed_form, mu_circ, mu_star, tail_mass
from .speeds import critical_speed, detour_scan, gamma_bullet, speed_constants
from .stochastic import (
    RngSpec,
    besq0_ensemble,
    f_cdf,
    ks_distance,
    mc_conditioned_occupation,
    mc_estimate,
    ray_knight_first,
    ray_knight_second,
    survival_eigen,
    survival_mc,
    write_histogram_csv,
)
from .variational import RateTable, solve_de2, tabulate_J, tail_coefficient, tail_exponent_fit

_LOGGER = logging.getLogger(__name__)

FDENSITY_POINTS = (0.5, 1.0, 2.0, 5.0)
# paths alive this long almost surely have integral above the last point
FDENSITY_X_MAX = 100.0
OCCUPATION2_LADDER = (0.25, 0.4)


@dataclass
class McRequest:
    c: float
    s: float
    paths: int
    seed: int
    workers: int
    table: Optional[RateTable] = None


@dataclass
class McOutcome:
    result: McResultDTO
    bin_edges: np.ndarray
    values: np.ndarray


@dataclass(kw_only=True)
class McExperimentDescription:
    """Describes one Monte Carlo experiment of the mc command."""
    key: str
    name: str
    c: float
    s: float
    paths: int
    run_fn: Callable[[McRequest, TolerancesDTO], McOutcome]


def _within(estimate: float, target: float, error: float, k: float) -> bool:
    return abs(estimate - target) <= k * error


def _result(experiment: str, request: McRequest, steps: dict[str, float], **kwargs: Any) -> McResultDTO:
    result = McResultDTO(experiment=experiment, seed=request.seed, workers=request.workers,
                         n_paths=request.paths, steps=steps, **kwargs)
    result.passed = bool(result.checks) and all(result.checks.values())
    return result


def _run_rayknight1(request: McRequest, tolerances: TolerancesDTO) -> McOutcome:
    field = ray_knight_first(a=request.c, n_paths=request.paths, rng=RngSpec(request.seed),
                             workers=request.workers)
    slope, error = field.fit
    result = _result(
        "rayknight1", request, {"dt": 1e-4, "bin_width": float(field.bin_width[0])},
        estimates={"profile_slope": slope}, standard_errors={"profile_slope": error},
        checks={"slope_is_two": _within(slope, 2.0, error, tolerances.standard_errors)})
    return McOutcome(result=result, bin_edges=field.bin_edges, values=field.occupation)


def _run_rayknight2(request: McRequest, tolerances: TolerancesDTO) -> McOutcome:
    field = ray_knight_second(b=request.c, n_paths=request.paths, rng=RngSpec(request.seed),
                              workers=request.workers)
    level, error = field.fit
    result = _result(
        "rayknight2", request, {"dt": 1e-4, "bin_width": float(field.bin_width[0])},
        estimates={"profile_level": level}, standard_errors={"profile_level": error},
        checks={"level_is_b": _within(level, request.c, error, tolerances.standard_errors)})
    return McOutcome(result=result, bin_edges=field.bin_edges, values=field.occupation)


def _run_fdensity(request: McRequest, tolerances: TolerancesDTO) -> McOutcome:
    step = 1e-3
    points = np.array(FDENSITY_POINTS)

    def estimator(count: int, generator: np.random.Generator) -> np.ndarray:
        ensemble = besq0_ensemble(request.c, step, count, generator, s_cap=float(points[-1]),
                                  x_max=FDENSITY_X_MAX)
        return (ensemble.integrals[:, None] <= points[None, :]).astype(float)

    cdf, errors = mc_estimate(estimator, request.paths, request.workers, RngSpec(request.seed))
    exact = [f_cdf(request.c, float(s)) for s in points]
    result = _result(
        "fdensity", request, {"step": step},
        estimates={f"cdf_{s:g}": float(v) for s, v in zip(points, cdf)},
        standard_errors={f"cdf_{s:g}": float(e) for s, e in zip(points, errors)},
        checks={f"cdf_{s:g}": _within(float(v), t, float(e), tolerances.standard_errors)
                for s, v, t, e in zip(points, cdf, exact, errors)})
    return McOutcome(result=result, bin_edges=np.concatenate(([0.0], points)), values=cdf)


def _run_survival(request: McRequest, tolerances: TolerancesDTO) -> McOutcome:
    dt = 1e-3
    estimate, error = survival_mc(request.c, request.s, request.paths, dt, RngSpec(request.seed), request.workers)
    exact = survival_eigen(request.c, request.s)
    result = _result(
        "survival", request, {"dt": dt},
        estimates={"survival": estimate, "eigen_series": exact}, standard_errors={"survival": error},
        checks={"matches_eigen_series": _within(estimate, exact, error, tolerances.standard_errors)})
    return McOutcome(result=result, bin_edges=np.array([0.0, request.s]), values=np.array([estimate]))


def _occupation(dimension: int, request: McRequest, s: float):
    return mc_conditioned_occupation(dimension, request.c, s, request.paths, RngSpec(request.seed),
                                     workers=request.workers)


def _run_occupation0(request: McRequest, tolerances: TolerancesDTO) -> McOutcome:
    histogram = _occupation(0, request, request.s)
    ks = ks_distance(histogram, mu_circ())
    result = _result(
        "occupation0", request, {"dt": 1e-3}, estimates={"ks_distance": ks},
        checks={"ks_within_tolerance": ks <= tolerances.ks_occupation0},
        acceptance_rate=histogram.acceptance_rate)
    return McOutcome(result=result, bin_edges=histogram.bin_edges, values=histogram.weights)


def _bullet_density(table: Optional[RateTable]) -> DensityGrid:
    if table is None:
        return mu_bullet_closed_form()
    speed, _ = gamma_bullet(table)
    return solve_de2(1.0 / speed).g


def _run_occupation2(request: McRequest, tolerances: TolerancesDTO) -> McOutcome:
    target = _bullet_density(request.table)
    ladder = sorted({s for s in OCCUPATION2_LADDER if s < request.s} | {request.s})
    distances = {}
    for s in ladder:
        histogram = _occupation(2, request, s)
        distances[s] = ks_distance(histogram, target)
        _LOGGER.info(f"d=2 occupation at s={s}: KS {distances[s]:.4f}, acceptance {histogram.acceptance_rate:.3e}")
    ks = distances[request.s]
    checks = {"ks_within_tolerance": ks <= tolerances.ks_occupation2}
    if len(ladder) > 1:
        checks["ks_decreasing_in_s"] = bool(np.all(np.diff([distances[s] for s in ladder]) < 0))
    result = _result(
        "occupation2", request, {"dt": 1e-3},
        estimates={f"ks_distance_{s:g}": d for s, d in distances.items()}, checks=checks,
        acceptance_rate=histogram.acceptance_rate)
    return McOutcome(result=result, bin_edges=histogram.bin_edges, values=histogram.weights)


MC_EXPERIMENT_DESCRIPTIONS: tuple[McExperimentDescription, ...] = (
    McExperimentDescription(
        key="rayknight1",
        name="Local times seen from a hitting time",
        c=1.0,
        s=0.0,
        paths=100_000,
        run_fn=_run_rayknight1,
    ),
    McExperimentDescription(
        key="rayknight2",
        name="Local times seen from an inverse local time",
        c=0.5,
        s=0.0,
        paths=100_000,
        run_fn=_run_rayknight2,
    ),
    McExperimentDescription(
        key="fdensity",
        name="Law of the total integral of BESQ^0",
        c=1.0,
        s=0.0,
        paths=100_000,
        run_fn=_run_fdensity,
    ),
    McExperimentDescription(
        key="survival",
        name="Survival of the time-changed d=0 process",
        c=0.5,
        s=0.25,
        paths=1_000_000,
        run_fn=_run_survival,
    ),
    McExperimentDescription(
        key="occupation0",
        name="Conditioned occupation for d=0",
        c=0.5,
        s=0.4,
        paths=1_000_000,
        run_fn=_run_occupation0,
    ),
    McExperimentDescription(
        key="occupation2",
        name="Conditioned occupation for d=2",
        c=0.5,
        s=0.5,
        paths=1_000_000,
        run_fn=_run_occupation2,
    ),
)


def _json_path(args: argparse.Namespace, suffix: str) -> Path:
    return Path(args.json) if args.json else Path(args.out).with_suffix(suffix)


def _write_json(data: dict[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def _load_table(args: argparse.Namespace) -> Optional[RateTable]:
    if getattr(args, "table", None):
        _LOGGER.info(f"Reading rate table from {args.table}")
        return RateTable.read_csv(args.table)
    return None


def cmd_rate_table(args: argparse.Namespace, manifest: RunManifestDTO) -> int:
    params = validate_parameters(RATE_TABLE_SCHEMA, {"alpha_min": args.alpha_min, "alpha_max": args.alpha_max,
                                                     "n": args.n, "workers": args.workers})
    if params["alpha_min"] >= params["alpha_max"]:
        raise vol.Invalid("alpha_min must be smaller than alpha_max")
    manifest.parameters.update(params)
    table = tabulate_J(np.linspace(params["alpha_min"], params["alpha_max"], params["n"]), workers=params["workers"])
    manifest.outputs.append(str(table.write_csv(args.out)))
    constants = speed_constants(table)
    manifest.outputs.append(str(_write_json(asdict(constants), _json_path(args, ".constants.json"))))
    print(json.dumps(asdict(constants), sort_keys=True))
    return EXIT_OK


def cmd_tail(args: argparse.Namespace, manifest: RunManifestDTO) -> int:
    params = validate_parameters(TAIL_SCHEMA, {"alpha": args.alpha, "eps_min": args.eps_min,
                                               "eps_max": args.eps_max, "n": args.n})
    if params["eps_min"] >= params["eps_max"]:
        raise vol.Invalid("eps_min must be smaller than eps_max")
    alpha = params.get("alpha")
    if alpha is None:
        # J is smallest at the mean of the unconstrained minimizer
        alpha = mean(mu_star())
        _LOGGER.info(f"No alpha given; using the minimizer of J at alpha={alpha:.6f}")
    manifest.parameters.update({**params, "alpha": alpha})
    solution = solve_de2(alpha)
    coefficient = tail_coefficient(solution)
    eps_grid = np.geomspace(params["eps_min"], params["eps_max"], params["n"])
    out = Path(args.out)
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TAIL_HEADER)
        for eps in eps_grid:
            writer.writerow([f"{eps:.17g}", f"{tail_mass(solution.g, float(eps)):.17g}",
                             f"{coefficient * eps ** 3:.17g}"])
    manifest.outputs.append(str(out))
    exponent = tail_exponent_fit(solution, eps_grid)
    summary = {"alpha": alpha, "tail_exponent": exponent, "tail_coefficient": coefficient}
    manifest.outputs.append(str(_write_json(summary, _json_path(args, ".json"))))
    print(f"{exponent:.6f}")
    return EXIT_OK


def cmd_mc(args: argparse.Namespace, manifest: RunManifestDTO) -> int:
    params = validate_parameters(MC_SCHEMA, {"experiment": args.experiment, "c": args.c, "s": args.s,
                                             "paths": args.paths, "seed": args.seed, "workers": args.workers})
    description = next(d for d in MC_EXPERIMENT_DESCRIPTIONS if d.key == params["experiment"])
    tolerances = load_tolerances(parse_overrides(args.tolerance))
    request = McRequest(c=params.get("c", description.c), s=params.get("s", description.s),
                        paths=params.get("paths", description.paths), seed=params["seed"],
                        workers=params["workers"], table=_load_table(args))
    manifest.seed = request.seed
    manifest.parameters.update({"experiment": description.key, "c": request.c, "s": request.s,
                                "paths": request.paths, "workers": request.workers,
                                "tolerances": asdict(tolerances)})
    _LOGGER.info(f"Running {description.name} with {request.paths} paths")
    outcome = description.run_fn(request, tolerances)
    manifest.outputs.append(str(write_histogram_csv(outcome.bin_edges, outcome.values, args.out)))
    manifest.outputs.append(str(_write_json(asdict(outcome.result), _json_path(args, ".json"))))
    verdict = "pass" if outcome.result.passed else "fail"
    print(f"{description.key}: {verdict}")
    if not outcome.result.passed:
        failed = [name for name, ok in outcome.result.checks.items() if not ok]
        _LOGGER.warning(f"{description.key} failed its checks: {failed}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_detour(args: argparse.Namespace, manifest: RunManifestDTO) -> int:
    params = validate_parameters(DETOUR_SCHEMA, {"v_min": args.v_min, "v_max": args.v_max, "n": args.n})
    if params["v_min"] >= params["v_max"]:
        raise vol.Invalid("v_min must be smaller than v_max")
    manifest.parameters.update(params)
    table = _load_table(args)
    if table is None:
        _LOGGER.info("No rate table given; tabulating J on [0.05, 0.85]")
        table = tabulate_J(np.linspace(0.05, 0.85, 161), workers=args.workers)
    speeds = np.linspace(params["v_min"], params["v_max"], params["n"])
    out = Path(args.out)
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(DETOUR_HEADER)
        for v in speeds:
            holds, worst_lambda, worst_margin = detour_scan(float(v), table)
            writer.writerow([f"{v:.17g}", "true" if holds else "false", f"{worst_lambda:.17g}",
                             f"{worst_margin:.17g}"])
    manifest.outputs.append(str(out))
    critical = critical_speed(table, speeds)
    manifest.outputs.append(str(_write_json({"critical_speed": critical}, _json_path(args, ".json"))))
    print(f"{critical:.6f}")
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace, RunManifestDTO], int]] = {
    "rate-table": cmd_rate_table,
    "tail": cmd_tail,
    "mc": cmd_mc,
    "detour": cmd_detour,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entropic_repulsion",
                                     description="Numerical laboratory for Brownian entropic repulsion.")
    parser.add_argument("--verbose", action="store_true", help="log at debug level")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser, default_out: str) -> None:
        sub.add_argument("--out", default=default_out, help="main CSV artifact")
        sub.add_argument("--json", default=None, help="companion JSON artifact")
        sub.add_argument("--workers", type=int, default=1)

    rate = commands.add_parser("rate-table", help="tabulate J(alpha) and derive the speed constants")
    rate.add_argument("--alpha-min", type=float, default=None)
    rate.add_argument("--alpha-max", type=float, default=None)
    rate.add_argument("--n", type=int, default=None)
    add_common(rate, "J.csv")

    tail = commands.add_parser("tail", help="tail mass near 1 and its fitted exponent")
    tail.add_argument("--alpha", type=float, default=None)
    tail.add_argument("--eps-min", type=float, default=None)
    tail.add_argument("--eps-max", type=float, default=None)
    tail.add_argument("--n", type=int, default=None)
    add_common(tail, "tail.csv")

    mc = commands.add_parser("mc", help="run a Monte Carlo experiment")
    mc.add_argument("experiment", choices=[d.key for d in MC_EXPERIMENT_DESCRIPTIONS])
    mc.add_argument("--c", type=float, default=None)
    mc.add_argument("--s", type=float, default=None)
    mc.add_argument("--paths", type=int, default=None)
    mc.add_argument("--seed", type=int, default=None)
    mc.add_argument("--table", default=None, help="rate table CSV for the d=2 target density")
    mc.add_argument("--tolerance", action="append", metavar="KEY=VALUE", help="override a pass/fail tolerance")
    add_common(mc, "mc.csv")

    detour = commands.add_parser("detour", help="scan the detour inequality over speeds")
    detour.add_argument("--v-min", type=float, default=None)
    detour.add_argument("--v-max", type=float, default=None)
    detour.add_argument("--n", type=int, default=None)
    detour.add_argument("--table", default=None, help="rate table CSV instead of tabulating J")
    add_common(detour, "detour.csv")
    return parser


def _exit_code(err: Exception) -> int:
    if isinstance(err, InfeasibleSimulationError):
        return EXIT_INFEASIBLE
    if isinstance(err, (vol.Invalid, DomainError, ContractError)):
        return EXIT_USAGE
    return EXIT_SOLVER


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    _LOGGER.info("=" * 60)
    _LOGGER.info(f"ENTROPIC REPULSION LAB {__version__}: {args.command}")
    _LOGGER.info("=" * 60)

    manifest = RunManifestDTO(command=args.command, parameters={}, seed=getattr(args, "seed", None),
                              version=__version__)
    start_time = time.time()
    try:
        manifest.exit_code = COMMANDS[args.command](args, manifest)
    except (vol.Invalid, DomainError, ContractError, RangeError, SolverError, SimulationError) as e:
        _LOGGER.error(f"{args.command} failed: {type(e).__name__}: {e}")
        manifest.exit_code = _exit_code(e)
    except Exception as e:
        _LOGGER.error(f"Unexpected error in {args.command}: {type(e).__name__}: {e}", exc_info=True)
        manifest.exit_code = 1
        raise
    finally:
        manifest.wall_time = time.time() - start_time
        if manifest.exit_code != EXIT_OK:
            manifest.outputs = [path for path in manifest.outputs if Path(path).exists()]
        _write_json(asdict(manifest), Path(f"{args.out}.manifest.json"))
    _LOGGER.info(f"{args.command} finished with exit code {manifest.exit_code} in {manifest.wall_time:.1f} seconds")
    return manifest.exit_code
