"""Probability densities on [0, 1] and the rate functionals evaluated on them.

A density mu(dx) = g(x)^2 dx is stored through its square root g on a uniform
grid. Derivatives are those of the piecewise-linear interpolant of g, and
Dirichlet energies are Richardson-combined with the every-other-sample subgrid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .const import (
    BOUNDARY_TOLERANCE,
    DEFAULT_GRID_POINTS,
    DENSITY_HEADER,
    NORMALIZATION_TOLERANCE,
)
from .exceptions import ContractError, DomainError
from .specfun import (
    SampledFunction,
    bessel_j0,
    bessel_j1,
    find_bessel_root,
    integrate,
    singular_sine_constant,
)

_LOGGER = logging.getLogger(__name__)

INFINITE_RATE = math.inf
TAIL_POINTS = 401


@dataclass(frozen=True, eq=False)
class DensityGrid:
    g: SampledFunction
    normalized: bool = True

    def __post_init__(self) -> None:
        if np.any(self.g.values < -1e-12):
            raise DomainError("The square root of a density cannot be negative")
        object.__setattr__(self, "g", self.g.with_values(np.maximum(self.g.values, 0.0)))
        if self.normalized:
            mass = self.mass
            if abs(mass - 1.0) > NORMALIZATION_TOLERANCE:
                _LOGGER.error(f"Density flagged as normalized carries mass {mass!r}")
                raise ContractError(f"Density flagged as normalized has total mass {mass}")

    @classmethod
    def from_density(cls, density: np.ndarray, a: float = 0.0, b: float = 1.0) -> DensityGrid:
        """Normalized grid from (possibly unnormalized) density samples."""
        raw = cls(g=SampledFunction.on_interval(np.sqrt(np.maximum(density, 0.0)), a, b), normalized=False)
        return raw.normalize()

    @property
    def x(self) -> np.ndarray:
        return self.g.grid

    @property
    def density(self) -> np.ndarray:
        return self.g.values ** 2

    @property
    def mass(self) -> float:
        return integrate(self.g.with_values(self.density))

    def normalize(self) -> DensityGrid:
        mass = self.mass
        if not mass > 0:
            raise DomainError("Cannot normalize a density with zero mass")
        return DensityGrid(g=self.g.with_values(self.g.values / math.sqrt(mass)), normalized=True)


@dataclass
class MeasureStats:
    mean: float
    tail_mass: dict[float, float] = field(default_factory=dict)


def _unit_grid(n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def _require_normalized(mu: DensityGrid, operation: str) -> None:
    if not mu.normalized:
        _LOGGER.error(f"{operation} called with an unnormalized density")
        raise ContractError(f"{operation} needs a normalized density")


def _piecewise_linear_energy(values: np.ndarray, spacing: float, origin: float, radial: bool) -> float:
    slopes = np.diff(values) / spacing
    if radial:
        x = origin + spacing * np.arange(values.size)
        weights = 0.5 * (x[1:] ** 2 - x[:-1] ** 2)
    else:
        weights = np.full(slopes.size, spacing)
    return float(np.sum(slopes ** 2 * weights))


def dirichlet_energy(f: SampledFunction, radial: bool = False) -> float:
    """Integral of w(x) f'(x)^2 with w = x when radial, else w = 1."""
    fine = _piecewise_linear_energy(f.values, f.spacing, f.origin, radial)
    if f.size < 5 or f.size % 2 == 0:
        return fine
    coarse = _piecewise_linear_energy(f.values[::2], 2.0 * f.spacing, f.origin, radial)
    return fine + (fine - coarse) / 3.0


def mu_star(n: int = DEFAULT_GRID_POINTS) -> DensityGrid:
    """Minimizer of I2: g(x) = J0(j0 sqrt(x)) / J1(j0)."""
    j0 = find_bessel_root()
    x = _unit_grid(n)
    g = bessel_j0(j0 * np.sqrt(x)) / bessel_j1(j0)
    return DensityGrid(g=SampledFunction.on_interval(g, 0.0, 1.0), normalized=True)


def mu_circ(n: int = DEFAULT_GRID_POINTS) -> DensityGrid:
    """Equality case of I0 >= 2 pi^2 E: density sin(pi x)^2 / (Z x)."""
    z = singular_sine_constant()
    x = _unit_grid(n)
    g = np.zeros_like(x)
    g[1:] = np.abs(np.sin(np.pi * x[1:])) / np.sqrt(z * x[1:])
    return DensityGrid(g=SampledFunction.on_interval(g, 0.0, 1.0), normalized=True)


def mu_bullet_closed_form(n: int = DEFAULT_GRID_POINTS) -> DensityGrid:
    """g proportional to J0(j0 x); solves x g'' + g' + j0^2 x g = 0 with g(1) = 0."""
    j0 = find_bessel_root()
    x = _unit_grid(n)
    return DensityGrid(g=SampledFunction.on_interval(bessel_j0(j0 * x), 0.0, 1.0), normalized=False).normalize()


def dirichlet_ground_state(n: int = DEFAULT_GRID_POINTS) -> DensityGrid:
    """2 sin(pi x)^2, the long-run occupation of scale-2 Brownian motion kept inside (0, 1)."""
    x = _unit_grid(n)
    g = math.sqrt(2.0) * np.abs(np.sin(np.pi * x))
    return DensityGrid(g=SampledFunction.on_interval(g, 0.0, 1.0), normalized=False).normalize()


def make_tent(alpha: float, half_width: float | None = None, n: int = DEFAULT_GRID_POINTS) -> DensityGrid:
    """Piecewise-linear g peaking at alpha with support [alpha - w, alpha + w].

    The default half width is min(alpha, 1 - alpha), giving peak sqrt(3 / (2 w)).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"Tent centre must lie in (0, 1), got {alpha}")
    widest = min(alpha, 1.0 - alpha)
    width = widest if half_width is None else half_width
    if not 0.0 < width <= widest + 1e-15:
        raise DomainError(f"Tent half width must lie in (0, {widest}], got {half_width}")
    x = _unit_grid(n)
    peak = math.sqrt(3.0 / (2.0 * width))
    g = peak * np.maximum(0.0, 1.0 - np.abs(x - alpha) / width)
    return DensityGrid(g=SampledFunction.on_interval(g, 0.0, 1.0), normalized=False).normalize()


def mean(mu: DensityGrid) -> float:
    _require_normalized(mu, "mean")
    return integrate(mu.g.with_values(mu.x * mu.density))


def functional_I2(mu: DensityGrid) -> float:
    """Integral of 2 x g'(x)^2; infinite unless g(1) = 0."""
    if abs(mu.g.values[-1]) > BOUNDARY_TOLERANCE:
        _LOGGER.debug(f"I2 is infinite: g(1) = {mu.g.values[-1]}")
        return INFINITE_RATE
    return 2.0 * dirichlet_energy(mu.g, radial=True)


def functional_I0(mu: DensityGrid) -> float:
    """Integral of 2 h'(x)^2 with h = sqrt(x) g; infinite unless g vanishes at both ends."""
    g = mu.g.values
    if abs(g[0]) > BOUNDARY_TOLERANCE or abs(g[-1]) > BOUNDARY_TOLERANCE:
        _LOGGER.debug(f"I0 is infinite: g(0) = {g[0]}, g(1) = {g[-1]}")
        return INFINITE_RATE
    h = mu.g.with_values(np.sqrt(np.maximum(mu.x, 0.0)) * g)
    return 2.0 * dirichlet_energy(h)


def tilt(mu: DensityGrid) -> DensityGrid:
    """Reweight the density by 1/x and renormalize.

    Maps the occupation measure of the time-changed process to that of the
    squared Bessel process itself.
    """
    density = mu.density
    x = mu.x
    if x[0] > 0:
        return DensityGrid.from_density(density / x, x[0], x[-1])
    if density[0] > BOUNDARY_TOLERANCE ** 2:
        _LOGGER.error(f"Tilt undefined: density at 0 is {density[0]}, integral of 1/x diverges")
        raise DomainError("The integral of 1/x against this density diverges")
    weighted = np.empty_like(density)
    weighted[1:] = density[1:] / x[1:]
    weighted[0] = max(0.0, 2.0 * weighted[1] - weighted[2])
    return DensityGrid.from_density(weighted, x[0], x[-1])


def untilt(mu: DensityGrid) -> DensityGrid:
    """Reweight the density by x and renormalize; inverse of tilt."""
    _require_normalized(mu, "untilt")
    return DensityGrid.from_density(mu.x * mu.density, mu.x[0], mu.x[-1])


def inverse_moment(mu: DensityGrid) -> float:
    """Integral of 1/x against mu, finite only when the density vanishes at 0."""
    _require_normalized(mu, "inverse_moment")
    return 1.0 / mean(tilt(mu))


def functional_I2_tilted(mu: DensityGrid) -> float:
    """Rate of the occupation measure of the time-changed d = 2 process: I2(tilt mu) / E(tilt mu)."""
    tilted = tilt(mu)
    return functional_I2(tilted) / mean(tilted)


def functional_I0_tilted(mu: DensityGrid) -> float:
    tilted = tilt(mu)
    return functional_I0(tilted) / mean(tilted)


def wirtinger_gap(h: SampledFunction) -> float:
    """Integral of h'^2 minus pi^2 times the integral of h^2, for h vanishing at 0 and 1."""
    if abs(h.values[0]) > 1e-8 or abs(h.values[-1]) > 1e-8:
        raise DomainError(f"Wirtinger gap needs h(0) = h(1) = 0, got {h.values[0]} and {h.values[-1]}")
    return dirichlet_energy(h) - math.pi ** 2 * integrate(h.with_values(h.values ** 2))


def tail_mass(mu: DensityGrid, eps: float) -> float:
    """Mass of (1 - eps, 1]."""
    _require_normalized(mu, "tail_mass")
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"Tail width must lie in (0, 1], got {eps}")
    left = mu.g.end - eps
    offset = (left - mu.g.origin) / mu.g.spacing
    start = int(round(offset))
    if abs(offset - start) < 1e-9 and (mu.g.size - start) % 2 == 1 and mu.g.size - start >= 3:
        piece = SampledFunction(values=mu.density[start:], spacing=mu.g.spacing, origin=left)
        return integrate(piece)
    spline = CubicSpline(mu.x, mu.g.values)
    local = np.linspace(left, mu.g.end, TAIL_POINTS)
    return integrate(SampledFunction.on_interval(spline(local) ** 2, left, mu.g.end))


def measure_stats(mu: DensityGrid, eps_values: list[float] | tuple[float, ...] = (0.01, 0.1, 1.0)) -> MeasureStats:
    return MeasureStats(mean=mean(mu), tail_mass={eps: tail_mass(mu, eps) for eps in eps_values})


def write_density_csv(mu: DensityGrid, path: Path | str) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(DENSITY_HEADER)
        for x, d in zip(mu.x, mu.density):
            writer.writerow([f"{x:.17g}", f"{d:.17g}"])
    _LOGGER.debug(f"Wrote density with {mu.g.size} samples to {path}")
    return path


def read_density_csv(path: Path | str) -> DensityGrid:
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader))
        if header != DENSITY_HEADER:
            raise ContractError(f"Unexpected density header {header}")
        rows = [(float(x), float(d)) for x, d in reader]
    x = np.array([r[0] for r in rows])
    density = np.array([r[1] for r in rows])
    return DensityGrid.from_density(density, x[0], x[-1])
