"""Speed constants and the cost functionals built on the rate curve J."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import logging

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .const import RETURN_COST
from .DTO.SpeedConstantsDTO import SpeedConstantsDTO
from .exceptions import ContractError, RangeError
from .specfun import find_bessel_root
from .variational import RateTable

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathSpec:
    """Piecewise-linear trajectory through (t, x) breakpoints starting at (0, 0)."""
    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        points = tuple((float(t), float(x)) for t, x in self.breakpoints)
        object.__setattr__(self, "breakpoints", points)
        if len(points) < 2 or points[0] != (0.0, 0.0):
            raise ContractError("A path needs at least two breakpoints and must start at (0, 0)")
        for slope in self.slopes:
            if not slope > 1.0:
                raise ContractError(f"Every segment must move faster than 1, got slope {slope}")

    @property
    def durations(self) -> np.ndarray:
        t = np.array([p[0] for p in self.breakpoints])
        durations = np.diff(t)
        if np.any(durations <= 0):
            raise ContractError("Breakpoint times must increase strictly")
        return durations

    @property
    def extents(self) -> np.ndarray:
        return np.diff([p[1] for p in self.breakpoints])

    @property
    def slopes(self) -> np.ndarray:
        return self.extents / self.durations


class RateCurve:
    """Monotone cubic interpolation of J over the alpha range of a table."""

    def __init__(self, table: RateTable) -> None:
        self.table = table
        self._interpolant = PchipInterpolator(table.alphas, table.J)
        self.alpha_min = float(table.alphas[0])
        self.alpha_max = float(table.alphas[-1])

    @property
    def speed_min(self) -> float:
        return 1.0 / self.alpha_max

    @property
    def speed_max(self) -> float:
        return 1.0 / self.alpha_min

    def J(self, alpha: float) -> float:
        if not self.alpha_min - 1e-12 <= alpha <= self.alpha_max + 1e-12:
            raise RangeError(f"alpha={alpha} outside the table range [{self.alpha_min}, {self.alpha_max}]")
        return float(self._interpolant(min(max(alpha, self.alpha_min), self.alpha_max)))

    def cost_rate(self, v: float) -> float:
        """v J(1/v): cost per unit time of travelling at speed v."""
        return v * self.J(1.0 / v)


def _vertex(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    a, b, c = np.polyfit(xs, ys, 2)
    if a <= 0:
        raise RangeError("Interpolating parabola through the lowest rows is not convex")
    x_min = -b / (2.0 * a)
    return float(x_min), float(c - b * b / (4.0 * a))


def _interior_minimum(xs: np.ndarray, ys: np.ndarray, label: str) -> tuple[float, float]:
    k = int(np.argmin(ys))
    if k == 0 or k == len(ys) - 1:
        _LOGGER.error(f"Minimum of {label} sits on the table edge at row {k}")
        raise RangeError(f"Minimum of {label} lies on the edge of the table")
    return _vertex(xs[k - 1:k + 2], ys[k - 1:k + 2])


def gamma_star(table: RateTable) -> float:
    """Inverse of the minimizer of J."""
    alpha_min, _ = _interior_minimum(table.alphas, table.J, "J")
    return 1.0 / alpha_min


def gamma_bullet(table: RateTable) -> tuple[float, float]:
    """Minimizer and minimum of v J(1/v)."""
    speeds = 1.0 / table.alphas[::-1]
    costs = speeds * table.J[::-1]
    return _interior_minimum(speeds, costs, "v J(1/v)")


def gamma_circ(table: RateTable) -> float:
    """Smallest v with v J(1/v) = 2 pi^2."""
    curve = RateCurve(table)
    speeds = 1.0 / table.alphas[::-1]
    excess = speeds * table.J[::-1] - RETURN_COST
    crossings = np.flatnonzero((excess[:-1] > 0) & (excess[1:] <= 0))
    if crossings.size == 0:
        raise RangeError("v J(1/v) does not cross 2 pi^2 within the table")
    k = int(crossings[0])
    if excess[k + 1] == 0:
        return float(speeds[k + 1])
    return float(brentq(lambda v: curve.cost_rate(v) - RETURN_COST, speeds[k], speeds[k + 1], xtol=1e-13))


def speed_constants(table: RateTable) -> SpeedConstantsDTO:
    bullet, bullet_cost = gamma_bullet(table)
    constants = SpeedConstantsDTO(
        j0=find_bessel_root(),
        gamma_star=gamma_star(table),
        gamma_bullet=bullet,
        Gamma_bullet=bullet_cost,
        gamma_circ=gamma_circ(table),
    )
    _LOGGER.info(f"Speed constants: {constants}")
    if not 1.0 < constants.gamma_circ < constants.gamma_bullet < constants.gamma_star:
        _LOGGER.warning(f"Speed constants are out of their expected order: {constants}")
    return constants


def speed_cost(v: float) -> float:
    """Cost per unit time of Brownian motion keeping drift v."""
    return 0.5 * v * v


def path_cost(path: PathSpec, table: RateTable) -> float:
    """Sum over segments of extent * J(1 / slope)."""
    curve = RateCurve(table)
    total = 0.0
    for extent, slope in zip(path.extents, path.slopes):
        if not curve.speed_min - 1e-12 <= slope <= curve.speed_max + 1e-12:
            raise RangeError(f"Segment slope {slope} outside the table speed range "
                             f"[{curve.speed_min}, {curve.speed_max}]")
        total += extent * curve.J(1.0 / slope)
    return float(total)


def detour_margin(v: float, lam: float, table: RateTable) -> float:
    """Right side minus left side of the detour inequality at return fraction lam."""
    if not 0.0 < lam <= 1.0:
        raise RangeError(f"Return fraction must lie in (0, 1], got {lam}")
    curve = RateCurve(table)
    if not curve.speed_min <= v <= curve.speed_max:
        raise RangeError(f"Speed {v} outside the table speed range [{curve.speed_min}, {curve.speed_max}]")
    direct = curve.cost_rate(v)
    if lam == 1.0:
        return RETURN_COST - direct
    boosted = v / (1.0 - lam)
    if boosted <= curve.speed_max:
        return lam * RETURN_COST + (1.0 - lam) * curve.cost_rate(boosted) - direct
    # beyond the table only the speed-cost floor v J(1/v) >= v^2 / 2 is available
    floor = lam * RETURN_COST + (1.0 - lam) * speed_cost(boosted) - direct
    if floor > 0:
        return floor
    raise RangeError(f"Return leg speed {boosted} is beyond the table and the speed-cost floor is inconclusive")


def detour_check(v: float, lam: float, table: RateTable) -> bool:
    """Whether going straight at speed v beats spending a fraction lam on the 2 pi^2 return leg."""
    return detour_margin(v, lam, table) > 0


def default_lambdas(count: int = 99) -> np.ndarray:
    return np.arange(1, count + 1) / (count + 1)


def detour_scan(v: float, table: RateTable, lambdas: Sequence[float] | None = None) -> tuple[bool, float, float]:
    """(holds for every lam, lam with the smallest margin, that margin)."""
    lambdas = default_lambdas() if lambdas is None else np.asarray(lambdas, dtype=float)
    margins = np.array([detour_margin(v, float(lam), table) for lam in lambdas])
    worst = int(np.argmin(margins))
    return bool(np.all(margins > 0)), float(lambdas[worst]), float(margins[worst])


def critical_speed(table: RateTable, speeds: Sequence[float], lambdas: Sequence[float] | None = None) -> float:
    """First speed of an increasing grid from which the detour inequality holds for every lam."""
    verdicts = [detour_scan(float(v), table, lambdas)[0] for v in speeds]
    flips = [k for k in range(1, len(verdicts)) if verdicts[k] != verdicts[k - 1]]
    if len(flips) != 1 or verdicts[0]:
        raise RangeError(f"Detour verdicts do not switch exactly once from failing to holding: {flips}")
    k = flips[0]
    lo, hi = float(speeds[k - 1]), float(speeds[k])
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if detour_scan(mid, table, lambdas)[0]:
            hi = mid
        else:
            lo = mid
    _LOGGER.info(f"Detour inequality holds from speed {hi:.6f}")
    return hi


def cost_ceiling_at_gamma_star(table: RateTable) -> float:
    """gamma* J(1/gamma*), an upper bound for the minimal cost rate."""
    g = gamma_star(table)
    return g * RateCurve(table).J(1.0 / g)


def cost_rate_gap(table: RateTable) -> np.ndarray:
    """v J(1/v) - v^2 / 2 on every table row."""
    speeds = 1.0 / table.alphas
    return speeds * table.J - 0.5 * speeds ** 2


