"""Series-seeded shooting for the two Euler-Lagrange eigenproblems.

Unconstrained mean:   2 x g'' + 2 g' - lam g = 0,
mean constrained:     x g'' + g' - (lam + nu x) g = 0,

both with g regular at 0 and g(1) = 0. The integration carries the state
(g, x g', int g^2, int x g^2, int 2 x g'^2) outward from a Frobenius seed, so
mass, mean and rate come straight out of the integrator.

For large positive nu the regular solution decays like exp(-sqrt(nu) x) past
the turning point -lam / nu, where outward integration picks up the growing
mode. There a second shot runs inward from g(1) = 0, x g'(1) = -1 and the two
are glued at a match point. Since x (g1 g2' - g1' g2) is constant, the mismatch
p_L g_R - g_L p_R at the match point equals g(1) of the regular solution.
"""
from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass
from functools import lru_cache
import logging
import math
from pathlib import Path
import time

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect, brentq

from .const import (
    ALPHA_BAND,
    COLD_START_ALPHA,
    DE1_BRACKET,
    DEFAULT_GRID_POINTS,
    MATCH_WIDTH,
    MAX_BRACKET_STEPS,
    NODE_GRID_POINTS,
    ODE_ATOL,
    ODE_METHOD,
    ODE_RTOL,
    RATE_TABLE_HEADER,
    SERIES_START,
    SERIES_TERM_TOLERANCE,
)
from .exceptions import ContractError, DomainError, SolverError
from .measures import DensityGrid, mean, tail_mass
from .specfun import SampledFunction, log_slope_fit

_LOGGER = logging.getLogger(__name__)

MONOTONICITY_NUS = (-3000.0, -300.0, -30.0, -3.0, 0.0, 3.0, 30.0, 300.0, 3000.0)
TAIL_EPS_RANGE = (1e-3, 1e-1)


@dataclass(frozen=True, eq=False)
class VariationalSolution:
    alpha: float
    lam: float
    nu: float
    g: DensityGrid
    rate: float
    boundary_slope: float
    flux: SampledFunction  # x g'(x), normalized like g


@dataclass(frozen=True)
class Shot:
    lam: float
    nu: float
    end_value: float
    end_flux: float
    mass: float
    first_moment: float
    energy: float
    sign_changes: int = 0
    interior_sign_changes: int = 0

    @property
    def mean(self) -> float:
        return self.first_moment / self.mass

    @property
    def rate(self) -> float:
        return self.energy / self.mass


@dataclass(frozen=True)
class RateTable:
    """Rows (alpha, J(alpha), C_alpha) with alpha strictly increasing."""
    rows: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        rows = tuple((float(a), float(j), float(c)) for a, j, c in self.rows)
        object.__setattr__(self, "rows", rows)
        if len(rows) < 3:
            raise ContractError("A rate table needs at least three rows")
        alphas = np.array([r[0] for r in rows])
        if np.any(np.diff(alphas) <= 0) or alphas[0] <= 0 or alphas[-1] >= 1:
            raise ContractError("Rate table alphas must increase strictly inside (0, 1)")
        if any(r[1] <= 0 or r[2] <= 0 for r in rows):
            raise ContractError("Rate table entries J and C must be positive")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def J(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def C(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def convexity_defect(self) -> float:
        """Smallest second difference of J, scaled to the local spacing."""
        a, j = self.alphas, self.J
        left = np.diff(a)[:-1]
        right = np.diff(a)[1:]
        slopes = np.diff(j) / np.diff(a)
        second = (slopes[1:] - slopes[:-1]) / (0.5 * (left + right))
        return float(np.min(second * left * right))

    def subsample(self, every: int) -> RateTable:
        return RateTable(rows=self.rows[::every])

    def write_csv(self, path: Path | str) -> Path:
        path = Path(path)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(RATE_TABLE_HEADER)
            for row in self.rows:
                writer.writerow([f"{value:.17g}" for value in row])
        return path

    @classmethod
    def read_csv(cls, path: Path | str) -> RateTable:
        with Path(path).open(newline="") as handle:
            reader = csv.reader(handle)
            header = tuple(next(reader))
            if header != RATE_TABLE_HEADER:
                raise ContractError(f"Unexpected rate table header {header}")
            return cls(rows=tuple(tuple(float(v) for v in row) for row in reader))


def series_start(lam: float, nu: float, x0: float = SERIES_START) -> tuple[float, float]:
    """Value and slope at x0 of the solution regular at 0 with g(0) = 1.

    Coefficients follow (k+1)^2 a_{k+1} = lam a_k + nu a_{k-1}.
    """
    if not 0.0 < x0 <= 1e-3:
        raise DomainError(f"Series seed point must lie in (0, 1e-3], got {x0}")
    previous, current = 1.0, lam
    value = 1.0 + lam * x0
    slope = lam
    power = x0
    k = 1
    while True:
        following = (lam * current + nu * previous) / (k + 1) ** 2
        term = following * power * x0
        value += term
        slope += (k + 1) * following * power
        if abs(term) < SERIES_TERM_TOLERANCE and abs(current * power) < SERIES_TERM_TOLERANCE:
            break
        previous, current = current, following
        power *= x0
        k += 1
        if k > 200:
            break
    return value, slope


def _rhs(x: float, y: np.ndarray, lam: float, nu: float) -> list[float]:
    g, p = y[0], y[1]
    return [p / x, (lam + nu * x) * g, g * g, x * g * g, 2.0 * p * p / x]


def _seed_state(lam: float, nu: float, x0: float) -> list[float]:
    g0, dg0 = series_start(lam, nu, x0)
    # integrals over [0, x0] from the leading terms g = 1 + lam x
    return [g0, x0 * dg0, x0 + lam * x0 ** 2, 0.5 * x0 ** 2, lam ** 2 * x0 ** 2]


_INWARD_STATE = (0.0, -1.0, 0.0, 0.0, 0.0)


def match_point(lam: float, nu: float) -> float:
    """Where the outward and inward shots meet; 1.0 means a single outward shot.

    The inward interval lies past the turning point, so lam + nu x > 0 on it.
    """
    if nu <= 0.0:
        return 1.0
    turning = max(-lam / nu, 0.0)
    return min(1.0, turning + MATCH_WIDTH / math.sqrt(nu))


def _integrate(lam: float, nu: float, start: float, end: float, state: Sequence[float],
               points: np.ndarray | None = None):
    """Integrate from start to end; points, if given, are ordered along the way and end is always last."""
    t_eval = None
    if points is not None:
        t_eval = np.asarray(points, dtype=float)
        if t_eval.size == 0 or t_eval[-1] != end:
            t_eval = np.append(t_eval, end)
    result = solve_ivp(
        _rhs, (start, end), list(state), method=ODE_METHOD, rtol=ODE_RTOL,
        atol=ODE_ATOL, t_eval=t_eval, args=(lam, nu))
    if not result.success:
        _LOGGER.error(f"ODE integration failed for lam={lam}, nu={nu}: {result.message}")
        raise SolverError(f"Integration failed for lam={lam}, nu={nu}: {result.message}")
    return result


def _count_sign_changes(values: np.ndarray) -> int:
    signs = np.sign(values)
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def shoot(lam: float, nu: float, x0: float = SERIES_START, count_nodes: bool = True) -> Shot:
    x_match = match_point(lam, nu)
    points = np.linspace(x0, x_match, NODE_GRID_POINTS) if count_nodes else None
    left = _integrate(lam, nu, x0, x_match, _seed_state(lam, nu, x0), points)
    g_match, p_match, mass, first_moment, energy = (float(v) for v in left.y[:, -1])
    changes = interior = 0
    if x_match >= 1.0:
        end_value, end_flux = g_match, p_match
        if count_nodes:
            interior = _count_sign_changes(left.y[0, :-1])
            changes = _count_sign_changes(left.y[0])
    else:
        right = _integrate(lam, nu, 1.0, x_match, _INWARD_STATE)
        g_right, p_right = float(right.y[0, -1]), float(right.y[1, -1])
        end_value = p_match * g_right - g_match * p_right
        scale = g_match / g_right
        # inward integrals run from 1 down to the match point
        mass -= scale ** 2 * right.y[2, -1]
        first_moment -= scale ** 2 * right.y[3, -1]
        energy -= scale ** 2 * right.y[4, -1]
        end_flux = -scale
        if count_nodes:
            # lam + nu x > 0 past the match point allows at most one zero there
            interior = _count_sign_changes(left.y[0])
            changes = interior + int(np.sign(g_match) * np.sign(end_value) < 0)
    return Shot(lam=lam, nu=nu, end_value=float(end_value), end_flux=float(end_flux), mass=float(mass),
                first_moment=float(first_moment), energy=float(energy), sign_changes=changes,
                interior_sign_changes=interior)


def _end_value(lam: float, nu: float, x0: float) -> float:
    return shoot(lam, nu, x0, count_nodes=False).end_value


def bracketed_root(function, lo: float, hi: float, args: tuple, what: str, xtol: float, rtol: float) -> float:
    f_lo, f_hi = function(lo, *args), function(hi, *args)
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0:
        _LOGGER.error(f"No sign change for the {what} on [{lo}, {hi}]: {f_lo}, {f_hi}")
        raise SolverError(f"No sign change for the {what} on [{lo}, {hi}]")
    try:
        return brentq(function, lo, hi, args=args, xtol=xtol, rtol=rtol, maxiter=200)
    except (ValueError, RuntimeError) as err:
        raise SolverError(f"Root search for the {what} failed on [{lo}, {hi}]: {err}") from err


def principal_lambda(nu: float, guess: float | None = None, x0: float = SERIES_START) -> float:
    """Largest lam for which the regular solution vanishes at 1, i.e. the node-free branch."""
    if guess is None:
        hi = max(0.0, -nu)
        # half steps stay off the large-nu eigenvalues -(2k + 1) sqrt(nu)
        step = 0.5 * max(1.0, math.sqrt(abs(nu)))
    else:
        step = 0.05 * (1.0 + abs(guess))
        hi = guess + step
        for _ in range(MAX_BRACKET_STEPS):
            if shoot(hi, nu, x0).sign_changes == 0:
                break
            hi += step
            step *= 2.0
        else:
            raise SolverError(f"No node-free upper bracket for nu={nu} near lam={guess}")

    floor = None
    lo = hi - step
    for _ in range(MAX_BRACKET_STEPS):
        changes = shoot(lo, nu, x0).sign_changes
        if changes == 1:
            break
        if changes == 0:
            hi = lo
            if floor is None:
                step *= 2.0
                lo = hi - step
            else:
                lo = 0.5 * (hi + floor)
        else:
            _LOGGER.debug(f"Node inside (0, 1) at lam={lo}, nu={nu}; tightening the bracket")
            floor = lo
            lo = 0.5 * (hi + floor)
    else:
        _LOGGER.error(f"Could not bracket the principal eigenvalue for nu={nu}")
        raise SolverError(f"Could not bracket the principal eigenvalue for nu={nu} (last bracket [{lo}, {hi}])")

    lam = bracketed_root(_end_value, lo, hi, (nu, x0), f"principal eigenvalue for nu={nu}",
                          xtol=1e-13, rtol=1e-14)
    if shoot(lam, nu, x0).interior_sign_changes != 0:
        raise SolverError(f"Root lam={lam} for nu={nu} is not sign definite on (0, 1)")
    _LOGGER.debug(f"Principal eigenvalue for nu={nu}: lam={lam} (bracket [{lo}, {hi}])")
    return lam


def _build_solution(alpha: float | None, lam: float, nu: float, x0: float, n: int) -> VariationalSolution:
    x = np.linspace(0.0, 1.0, n)
    if x[1] < x0:
        raise DomainError(f"Grid with {n} points is finer than the series seed point {x0}")
    x_match = match_point(lam, nu)
    left_grid = x[1:] if x_match >= 1.0 else x[1:][x[1:] < x_match]
    left = _integrate(lam, nu, x0, x_match, _seed_state(lam, nu, x0), left_grid)
    g = np.concatenate(([1.0], left.y[0, :left_grid.size]))
    flux = np.concatenate(([0.0], left.y[1, :left_grid.size]))
    mass, first_moment, energy = left.y[2, -1], left.y[3, -1], left.y[4, -1]
    if x_match < 1.0:
        right_grid = x[x >= x_match][::-1]
        right = _integrate(lam, nu, 1.0, x_match, _INWARD_STATE, right_grid)
        glue = left.y[0, -1] / right.y[0, -1]
        g = np.concatenate((g, glue * right.y[0, :right_grid.size][::-1]))
        flux = np.concatenate((flux, glue * right.y[1, :right_grid.size][::-1]))
        mass -= glue ** 2 * right.y[2, -1]
        first_moment -= glue ** 2 * right.y[3, -1]
        energy -= glue ** 2 * right.y[4, -1]
    scale = 1.0 / math.sqrt(mass)
    # the boundary zero is only approximate; clip round-off below zero
    density = DensityGrid(g=SampledFunction.on_interval(np.maximum(g * scale, 0.0), 0.0, 1.0),
                          normalized=False).normalize()
    solution = VariationalSolution(
        alpha=first_moment / mass if alpha is None else alpha,
        lam=lam,
        nu=nu,
        g=density,
        rate=energy / mass,
        boundary_slope=float(flux[-1] * scale),
        flux=SampledFunction.on_interval(flux * scale, 0.0, 1.0),
    )
    if solution.boundary_slope == 0.0:
        raise SolverError(f"Boundary slope vanishes for lam={lam}, nu={nu}")
    if abs(solution.boundary_slope) <= 1e-4:
        # mass concentrated near 0 leaves an exponentially small slope at 1
        _LOGGER.warning(f"Small boundary slope {solution.boundary_slope:.3e} at lam={lam}, nu={nu}")
    return solution


def solve_de1(x0: float = SERIES_START, n: int = DEFAULT_GRID_POINTS) -> VariationalSolution:
    """Unconstrained minimizer: smallest |lam| with 2 x g'' + 2 g' = lam g and g(1) = 0."""
    lo, hi = DE1_BRACKET

    def end_value(lam_de1: float) -> float:
        return _end_value(0.5 * lam_de1, 0.0, x0)

    if end_value(lo) * end_value(hi) > 0:
        raise SolverError(f"No sign change of g(1) on the bracket {DE1_BRACKET}")
    lam_de1 = bisect(end_value, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)
    solution = _build_solution(None, 0.5 * lam_de1, 0.0, x0, n)
    _LOGGER.info(f"Unconstrained minimizer: lam={lam_de1:.12f}, rate={solution.rate:.12f}")
    return VariationalSolution(alpha=solution.alpha, lam=lam_de1, nu=0.0, g=solution.g, rate=solution.rate,
                               boundary_slope=solution.boundary_slope, flux=solution.flux)


def check_mean_monotonicity(nus: Sequence[float] = MONOTONICITY_NUS) -> bool:
    """Whether the mean of the principal solution decreases along the given nu values."""
    means = []
    for nu in nus:
        lam = principal_lambda(nu)
        means.append(shoot(lam, nu, count_nodes=False).mean)
    monotone = bool(np.all(np.diff(means) < 0))
    if monotone:
        _LOGGER.debug(f"Mean decreases in nu over {list(nus)}: {means}")
    else:
        _LOGGER.warning(f"Mean is not monotone in nu over {list(nus)}: {means}; using Newton solves")
    return monotone


@lru_cache(maxsize=None)
def mean_is_monotone() -> bool:
    return check_mean_monotonicity()


def newton_solve(alpha: float, lam: float, nu: float, x0: float = SERIES_START,
                 max_iterations: int = 60) -> tuple[float, float]:
    """Damped Newton on (g(1) / sqrt(mass), mean - alpha) in the unknowns (lam, nu)."""

    def residual(point: np.ndarray) -> np.ndarray:
        shot = shoot(point[0], point[1], x0, count_nodes=False)
        return np.array([shot.end_value / math.sqrt(shot.mass), shot.mean - alpha])

    point = np.array([lam, nu], dtype=float)
    current = residual(point)
    for iteration in range(max_iterations):
        if np.max(np.abs(current)) < 1e-12:
            break
        jacobian = np.empty((2, 2))
        for k in range(2):
            h = 1e-6 * (1.0 + abs(point[k]))
            shifted = point.copy()
            shifted[k] += h
            jacobian[:, k] = (residual(shifted) - current) / h
        try:
            direction = np.linalg.solve(jacobian, -current)
        except np.linalg.LinAlgError as err:
            raise SolverError(f"Singular Jacobian at lam={point[0]}, nu={point[1]}") from err
        damping = 1.0
        while damping > 1e-6:
            candidate = point + damping * direction
            trial = residual(candidate)
            if np.linalg.norm(trial) < np.linalg.norm(current):
                point, current = candidate, trial
                break
            damping *= 0.5
        else:
            raise SolverError(f"Newton stalled for alpha={alpha} at lam={point[0]}, nu={point[1]}")
        _LOGGER.debug(f"Newton iteration {iteration + 1}: residual {current}, damping {damping}")
    else:
        raise SolverError(f"Newton did not converge for alpha={alpha}; last residual {current}")
    if shoot(point[0], point[1], x0).interior_sign_changes != 0:
        raise SolverError(f"Newton converged to a non-principal branch for alpha={alpha}")
    return float(point[0]), float(point[1])


def _nested_solve(alpha: float, lam_guess: float | None, nu_guess: float | None,
                  x0: float) -> tuple[float, float]:
    lam_memory = {"lam": lam_guess}

    def mean_gap(nu: float) -> float:
        lam = principal_lambda(nu, lam_memory["lam"], x0)
        lam_memory["lam"] = lam
        return shoot(lam, nu, x0, count_nodes=False).mean - alpha

    centre = 0.0 if nu_guess is None else nu_guess
    width = 1.0 if nu_guess is None else 0.02 * (1.0 + abs(nu_guess))
    lo, hi = centre - width, centre + width
    gap_lo, gap_hi = mean_gap(lo), mean_gap(hi)
    for _ in range(MAX_BRACKET_STEPS):
        if gap_lo > 0 > gap_hi:
            break
        if gap_lo <= 0:
            lo -= width
            gap_lo = mean_gap(lo)
        if gap_hi >= 0:
            hi += width
            gap_hi = mean_gap(hi)
        width *= 2.0
    else:
        raise SolverError(f"Could not bracket nu for alpha={alpha} (last bracket [{lo}, {hi}])")
    nu = bracketed_root(mean_gap, lo, hi, (), f"multiplier at alpha={alpha}", xtol=1e-10, rtol=1e-13)
    lam = principal_lambda(nu, lam_memory["lam"], x0)
    return lam, nu


def solve_de2(alpha: float, guess: tuple[float, float] | None = None, x0: float = SERIES_START,
              n: int = DEFAULT_GRID_POINTS) -> VariationalSolution:
    """Minimizer of I2 among densities with mean alpha.

    guess is an optional (lam, nu) starting point, e.g. from a neighbouring alpha.
    """
    lo_band, hi_band = ALPHA_BAND
    if not lo_band <= alpha <= hi_band:
        raise DomainError(f"alpha={alpha} is outside the supported band [{lo_band}, {hi_band}]")
    lam_guess, nu_guess = guess if guess is not None else (None, None)
    start = time.time()
    if mean_is_monotone():
        try:
            lam, nu = _nested_solve(alpha, lam_guess, nu_guess, x0)
        except SolverError as err:
            _LOGGER.warning(f"Nested solve failed for alpha={alpha} ({err}); falling back to Newton")
            lam, nu = _newton_from(alpha, lam_guess, nu_guess, x0)
    else:
        lam, nu = _newton_from(alpha, lam_guess, nu_guess, x0)
    solution = _build_solution(alpha, lam, nu, x0, n)
    _LOGGER.debug(f"alpha={alpha}: lam={lam}, nu={nu}, J={solution.rate} in {time.time() - start:.3f} seconds")
    return solution


def _newton_from(alpha: float, lam_guess: float | None, nu_guess: float | None, x0: float) -> tuple[float, float]:
    nu = 0.0 if nu_guess is None else nu_guess
    lam = principal_lambda(nu, lam_guess, x0) if lam_guess is None else lam_guess
    return newton_solve(alpha, lam, nu, x0)


def tail_coefficient(sol: VariationalSolution) -> float:
    """C in mu((1 - eps, 1]) ~ C eps^3, equal to g'(1)^2 / 3."""
    return sol.boundary_slope ** 2 / 3.0


def tail_exponent_fit(sol: VariationalSolution | DensityGrid, eps_grid: Sequence[float]) -> float:
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size < 5:
        raise DomainError(f"Tail exponent fit needs at least five widths, got {eps.size}")
    lo, hi = TAIL_EPS_RANGE
    if np.any(eps < lo * (1 - 1e-12)) or np.any(eps > hi * (1 + 1e-12)):
        raise DomainError(f"Tail widths must lie in [{lo}, {hi}]")
    density = sol.g if isinstance(sol, VariationalSolution) else sol
    masses = [tail_mass(density, float(e)) for e in eps]
    slope, _ = log_slope_fit(eps, masses)
    return slope


def near_one_lower_bound(eps: float) -> float:
    """Lower bound (pi^2 / 2)(1 - eps)^2 / eps^2 on J(1 - eps^2)."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    return 0.5 * math.pi ** 2 * (1.0 - eps) ** 2 / eps ** 2


def _extrapolate(history: list[tuple[float, float, float]], alpha: float) -> tuple[float, float] | None:
    if len(history) >= 2:
        (a1, l1, n1), (a2, l2, n2) = history[-2], history[-1]
        weight = (alpha - a2) / (a2 - a1)
        return l2 + weight * (l2 - l1), n2 + weight * (n2 - n1)
    if history:
        return history[-1][1], history[-1][2]
    return None


def _solve_row(alpha: float, guess: tuple[float, float] | None, n: int) -> VariationalSolution:
    try:
        return solve_de2(alpha, guess, n=n)
    except SolverError as err:
        if guess is None:
            raise SolverError(f"alpha={alpha}: {err}") from err
        _LOGGER.warning(f"Warm start failed at alpha={alpha}: {err}; retrying cold")
        try:
            return solve_de2(alpha, None, n=n)
        except SolverError as cold_err:
            raise SolverError(f"alpha={alpha}: {cold_err}") from cold_err


def continuation_order(alphas: Sequence[float]) -> tuple[list[int], list[int]]:
    """Upward and downward index sweeps, both starting at the alpha closest to COLD_START_ALPHA."""
    pivot = int(np.argmin(np.abs(np.asarray(alphas, dtype=float) - COLD_START_ALPHA)))
    return list(range(pivot, len(alphas))), list(range(pivot, -1, -1))


def _tabulate_segment(alphas: Sequence[float], n: int = DEFAULT_GRID_POINTS) -> list[tuple[float, float, float]]:
    alphas = [float(a) for a in alphas]
    solutions: dict[int, VariationalSolution] = {}
    for sweep in continuation_order(alphas):
        history: list[tuple[float, float, float]] = []
        for i in sweep:
            if i not in solutions:
                solutions[i] = _solve_row(alphas[i], _extrapolate(history, alphas[i]), n)
                _LOGGER.debug(f"Row {len(solutions)}/{len(alphas)}: alpha={alphas[i]}, "
                              f"J={solutions[i].rate}, nu={solutions[i].nu}")
            history.append((alphas[i], solutions[i].lam, solutions[i].nu))
    return [(alpha, solutions[i].rate, tail_coefficient(solutions[i])) for i, alpha in enumerate(alphas)]


def tabulate_J(alphas: Sequence[float], workers: int = 1, n: int = DEFAULT_GRID_POINTS) -> RateTable:
    """Rate curve J with tail coefficients, by warm-started continuation in alpha.

    Each contiguous segment (one per worker) starts cold at its alpha closest
    to COLD_START_ALPHA and is continued outward in both directions; the
    segments are merged in alpha order.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size < 3 or np.any(np.diff(alphas) <= 0):
        raise DomainError("tabulate_J needs at least three strictly increasing alphas")
    lo_band, hi_band = ALPHA_BAND
    if alphas[0] < lo_band or alphas[-1] > hi_band:
        raise DomainError(f"alphas must lie in the supported band [{lo_band}, {hi_band}]")

    start = time.time()
    _LOGGER.info(f"Tabulating J on {alphas.size} alphas in [{alphas[0]}, {alphas[-1]}] with {workers} worker(s)")
    mean_is_monotone()
    segments = [list(seg) for seg in np.array_split(alphas, max(1, min(workers, alphas.size))) if seg.size]
    if len(segments) == 1:
        parts = [_tabulate_segment(segments[0], n)]
    else:
        with ProcessPoolExecutor(max_workers=len(segments)) as pool:
            parts = list(pool.map(_tabulate_segment, segments, [n] * len(segments)))
    table = RateTable(rows=tuple(row for part in parts for row in part))

    defect = table.convexity_defect()
    scale = float(np.max(table.J))
    if defect < -1e-6 * scale:
        _LOGGER.warning(f"Tabulated J is not convex: smallest second difference {defect}")
    _LOGGER.info(f"Rate table finished in {time.time() - start:.1f} seconds (convexity defect {defect:.3e})")
    return table
