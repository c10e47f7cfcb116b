"""Monte Carlo engine for squared Bessel processes and Brownian local times.

Statistical properties used as oracles:

- BESQ^d(c) has E[Y_x] = c + d x and, for d = 2, Var[Y_x] = 4 c x + 4 x^2.
- BESQ^0(c) is a martingale absorbed at 0; its total integral S has the
  one-sided stable density f(c, s) = c / (sqrt(8 pi) s^(3/2)) exp(-c^2 / (8 s)).
- Reparametrising Y by its running integral gives a process Z with generator
  (1/x) L_d: for d = 0 it is 2 B killed at 0, for d = 2 it is |z0 + 2 W| with W planar.
- Ray-Knight: local times of Brownian motion seen from a hitting time are BESQ^2,
  seen from an inverse local time they are BESQ^0.

Every sampler draws from numpy generators derived from an RngSpec, so a fixed
(seed, workers) pair reproduces results bit for bit.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass
import logging
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.special import ndtr

from .const import BESQ0_STEP_CAP, DEFAULT_BIN_WIDTH, HISTOGRAM_HEADER, MIN_MC_PATHS, SURVIVAL_SERIES_REACH
from .exceptions import DomainError, InfeasibleSimulationError, SimulationError
from .measures import DensityGrid

_LOGGER = logging.getLogger(__name__)

PATH_CHUNK = 16384
BATCH_PATHS = 20000
STOP_WINDOW = 0.005


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,)))

    def for_worker(self, worker: int) -> RngSpec:
        return RngSpec(seed=self.seed, stream=worker)


@dataclass(frozen=True, eq=False)
class DiffusionPath:
    values: np.ndarray
    step: float
    dimension: int
    start: float
    absorbed_at: Optional[int] = None
    clock: Optional[np.ndarray] = None  # rho(t) on the same grid, for time-changed paths

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.size == 0 or not np.all(np.isfinite(values)):
            raise DomainError("A diffusion path needs finite values")
        if not self.step > 0:
            raise DomainError(f"Path step must be positive, got {self.step}")


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    bin_edges: np.ndarray
    occupation: np.ndarray
    elapsed: float
    standard_error: Optional[np.ndarray] = None
    # (estimate, standard error) of a per-path summary of the profile
    fit: Optional[tuple[float, float]] = None

    @property
    def bin_width(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centres(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.occupation * self.bin_width))


@dataclass(frozen=True, eq=False)
class OccupationHistogram:
    bin_edges: np.ndarray
    weights: np.ndarray
    accepted: int = 0
    attempted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempted if self.attempted else 0.0

    def cdf(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.weights)))


# -- squared Bessel processes ------------------------------------------------

def sample_besq2(c: float, x_max: float, step: float, rng: RngSpec) -> DiffusionPath:
    """Exact grid samples of BESQ^2(c) as the squared norm of a planar Brownian motion from (sqrt c, 0)."""
    if c < 0 or x_max <= 0 or step <= 0:
        raise DomainError(f"Invalid BESQ^2 parameters c={c}, x_max={x_max}, step={step}")
    n = int(round(x_max / step))
    increments = rng.generator().normal(0.0, math.sqrt(step), size=(n, 2))
    planar = np.vstack((np.zeros((1, 2)), np.cumsum(increments, axis=0)))
    values = (math.sqrt(c) + planar[:, 0]) ** 2 + planar[:, 1] ** 2
    return DiffusionPath(values=values, step=step, dimension=2, start=c)


def besq2_at(c: float, points: Sequence[float], n_paths: int, generator: np.random.Generator) -> np.ndarray:
    """BESQ^2(c) sampled exactly at increasing points, shape (n_paths, len(points))."""
    points = np.asarray(points, dtype=float)
    gaps = np.diff(np.concatenate(([0.0], points)))
    increments = generator.normal(size=(n_paths, points.size, 2)) * np.sqrt(gaps)[None, :, None]
    planar = np.cumsum(increments, axis=1)
    return (math.sqrt(c) + planar[..., 0]) ** 2 + planar[..., 1] ** 2


def sample_besq0(c: float, step: float, rng: RngSpec, max_steps: int = BESQ0_STEP_CAP) -> DiffusionPath:
    """Full-truncation Euler path of BESQ^0(c), run until absorption at 0."""
    if not 0 < c <= 10 or not 0 < step <= 1e-3:
        raise DomainError(f"BESQ^0 sampling needs 0 < c <= 10 and 0 < step <= 1e-3, got c={c}, step={step}")
    generator = rng.generator()
    scale = 2.0 * math.sqrt(step)
    values = [c]
    y = c
    while True:
        noise = generator.standard_normal(PATH_CHUNK)
        for xi in noise:
            y = max(0.0, y + scale * math.sqrt(y) * xi)
            values.append(y)
            if y == 0.0:
                return DiffusionPath(values=np.array(values), step=step, dimension=0, start=c,
                                     absorbed_at=len(values) - 1)
        if len(values) > max_steps:
            _LOGGER.error(f"BESQ^0 path from c={c} not absorbed after {max_steps} steps")
            raise SimulationError(f"BESQ^0 path exceeded {max_steps} steps without absorption")


@dataclass(frozen=True, eq=False)
class Besq0Ensemble:
    integrals: np.ndarray  # inf where the running integral passed the cap
    values_at: np.ndarray  # (n_paths, len(points))
    points: np.ndarray
    step: float


def besq0_ensemble(c: float, step: float, n_paths: int, generator: np.random.Generator,
                   points: Sequence[float] = (), s_cap: float = math.inf,
                   x_max: float = math.inf, max_steps: int = BESQ0_STEP_CAP) -> Besq0Ensemble:
    """Vectorised full-truncation Euler for many BESQ^0(c) paths.

    Tracks the trapezoid integral of each path until absorption, until it
    exceeds s_cap or until x_max, and records values at the given points.
    Integrals of paths stopped early are reported as inf.
    """
    if not 0 < c <= 10 or not 0 < step <= 1e-3:
        raise DomainError(f"BESQ^0 sampling needs 0 < c <= 10 and 0 < step <= 1e-3, got c={c}, step={step}")
    points = np.asarray(points, dtype=float)
    marks = {int(round(p / step)): i for i, p in enumerate(points)}
    last_mark = max(marks) if marks else -1
    y = np.full(n_paths, float(c))
    integral = np.zeros(n_paths)
    values_at = np.zeros((n_paths, points.size))
    active = np.ones(n_paths, dtype=bool)
    scale = 2.0 * math.sqrt(step)
    horizon = math.inf if math.isinf(x_max) else int(round(x_max / step))
    k = 0
    while (active.any() and k < horizon) or k <= last_mark:
        if k in marks:
            values_at[:, marks[k]] = y
        if k >= max_steps:
            raise SimulationError(f"{int(active.sum())} BESQ^0 paths still alive after {max_steps} steps")
        idx = np.flatnonzero(active)
        if idx.size:
            current = y[idx]
            following = np.maximum(0.0, current + scale * np.sqrt(current) * generator.standard_normal(idx.size))
            y[idx] = following
            integral[idx] += 0.5 * step * (current + following)
            active[idx] = (following > 0.0) & (integral[idx] <= s_cap)
        k += 1
    integrals = np.where(active | (integral > s_cap), math.inf, integral)
    return Besq0Ensemble(integrals=integrals, values_at=values_at, points=points, step=step)


def f_density(c: float, s: float | np.ndarray) -> float | np.ndarray:
    """Density of the total integral of BESQ^0(c)."""
    s_arr = np.asarray(s, dtype=float)
    if c <= 0 or np.any(s_arr <= 0):
        raise DomainError(f"f_density needs positive arguments, got c={c}, s={s}")
    value = c / (math.sqrt(8.0 * math.pi) * s_arr ** 1.5) * np.exp(-c * c / (8.0 * s_arr))
    return float(value) if s_arr.ndim == 0 else value


def f_cdf(c: float, s: float) -> float:
    if s <= 0:
        raise DomainError(f"f_cdf needs s > 0, got {s}")
    value, _ = quad(lambda u: f_density(c, u), 0.0, s, limit=200, epsabs=1e-13)
    return float(value)


# -- time change and local time ---------------------------------------------

def time_change(path: DiffusionPath, n_out: int | None = None) -> DiffusionPath:
    """Z_t = Y_rho(t), rho the inverse of the running integral of the piecewise-linear path."""
    end = path.values.size if path.absorbed_at is None else path.absorbed_at + 1
    y = path.values[:end]
    if y.size < 2:
        raise DomainError("Time change needs a path with at least two samples")
    cumulative = cumulative_trapezoid(y, dx=path.step, initial=0.0)
    total = float(cumulative[-1])
    if not total > 0:
        raise DomainError("Time change of a path with zero integral")
    n_out = y.size if n_out is None else n_out
    t = np.linspace(0.0, total, n_out)
    k = np.clip(np.searchsorted(cumulative, t, side="right") - 1, 0, y.size - 2)
    rest = np.maximum(t - cumulative[k], 0.0)
    slope = (y[k + 1] - y[k]) / path.step
    root = np.sqrt(np.maximum(y[k] ** 2 + 2.0 * slope * rest, 0.0))
    denominator = y[k] + root
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(denominator > 0, 2.0 * rest / denominator, 0.0)
    u = np.minimum(u, path.step)
    rho = k * path.step + u
    z = y[k] + slope * u
    return DiffusionPath(values=np.maximum(z, 0.0), step=total / (n_out - 1), dimension=path.dimension,
                         start=float(y[0]), clock=rho)


def local_time_field(positions: Sequence[float] | np.ndarray, dt: float, bin_width: float = DEFAULT_BIN_WIDTH,
                     edges: np.ndarray | None = None, weights: np.ndarray | None = None) -> LocalTimeField:
    """Occupation time per unit length of a sampled path.

    Each sample stands for dt units of time (scaled by weights when given).
    Elapsed time counts every sample; the mass identity holds when the edges cover the path.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        raise DomainError("local_time_field needs at least one position")
    if edges is None:
        lo = math.floor(positions.min() / bin_width) * bin_width
        hi = math.ceil(positions.max() / bin_width) * bin_width
        if hi <= lo:
            hi = lo + bin_width
        edges = lo + bin_width * np.arange(int(round((hi - lo) / bin_width)) + 1)
    weights = np.ones(positions.size) if weights is None else np.asarray(weights, dtype=float)
    counts, _ = np.histogram(positions, bins=edges, weights=weights)
    return LocalTimeField(bin_edges=np.asarray(edges, dtype=float), occupation=dt * counts / np.diff(edges),
                          elapsed=float(dt * np.sum(weights)))


def _first_passage_occupation(a: float, dt: float, level_edges: np.ndarray, floor: float,
                              generator: np.random.Generator) -> np.ndarray:
    """Occupation per bin of Brownian motion from 0 reflected at floor, up to its first hit of a."""
    sd = math.sqrt(dt)
    counts = np.zeros(level_edges.size - 1)
    free_last, push = 0.0, floor
    counts += np.histogram([0.0], bins=level_edges)[0]
    while True:
        free = free_last + np.cumsum(generator.normal(0.0, sd, PATH_CHUNK))
        pushes = np.maximum(push, np.maximum.accumulate(floor - free))
        reflected = free + np.maximum(pushes, 0.0)
        hits = np.flatnonzero(reflected >= a)
        stop = hits[0] if hits.size else PATH_CHUNK
        counts += np.histogram(reflected[:stop], bins=level_edges)[0]
        if hits.size:
            return dt * counts / np.diff(level_edges)
        free_last, push = free[-1], pushes[-1]


def _fold(free: np.ndarray, half_range: float) -> np.ndarray:
    y = np.mod(free + half_range, 4.0 * half_range)
    return np.where(y <= 2.0 * half_range, y - half_range, 3.0 * half_range - y)


def _inverse_local_time_occupation(b: float, dt: float, edges: np.ndarray, stop_window: float,
                                   generator: np.random.Generator) -> np.ndarray:
    """Occupation per bin of Brownian motion folded into the edge range, until its local time at 0 reaches b."""
    half_range = float(edges[-1])
    sd = math.sqrt(dt)
    per_sample = dt / stop_window
    counts = np.zeros(edges.size - 1)
    free_last, local = 0.0, 0.0
    positions = np.array([0.0])
    while True:
        inside = np.abs(positions) < 0.5 * stop_window
        running = local + np.cumsum(inside) * per_sample
        crossed = np.flatnonzero(running >= b)
        if crossed.size:
            stop = crossed[0]
            before = running[stop] - per_sample
            weights = np.ones(stop + 1)
            weights[stop] = (b - before) / per_sample
            counts += np.histogram(positions[:stop + 1], bins=edges, weights=weights)[0]
            return dt * counts / np.diff(edges)
        counts += np.histogram(positions, bins=edges)[0]
        local = running[-1]
        free = free_last + np.cumsum(generator.normal(0.0, sd, PATH_CHUNK))
        free_last = free[-1]
        positions = _fold(free, half_range)


def _profile_field(edges: np.ndarray, mean_row: np.ndarray, se_row: np.ndarray) -> LocalTimeField:
    occupation, errors = mean_row[:-1], se_row[:-1]
    return LocalTimeField(bin_edges=edges, occupation=occupation, elapsed=float(np.sum(occupation * np.diff(edges))),
                          standard_error=errors, fit=(float(mean_row[-1]), float(se_row[-1])))


def ray_knight_first(a: float = 1.0, n_paths: int = 1000, dt: float = 1e-4, bin_width: float = 0.05,
                     rng: RngSpec = RngSpec(0), workers: int = 1, floor: float = -0.1) -> LocalTimeField:
    """Mean of x -> L_{a-x}(tau_a) for x in [0, a]; the expected profile is 2x.

    Excursions below floor are reflected: they return to floor before reaching
    a and add no local time to levels in [0, a]. The fit is the least-squares
    slope through the origin of each path's profile, expected to be 2.
    """
    m = int(round(a / bin_width))
    depth = int(math.ceil(-floor / bin_width))
    level_edges = a - bin_width * np.arange(m + depth, -1, -1)
    x_edges = bin_width * np.arange(m + 1)
    centres = 0.5 * (x_edges[1:] + x_edges[:-1])

    def estimator(count: int, generator: np.random.Generator) -> np.ndarray:
        rows = np.array([_first_passage_occupation(a, dt, level_edges, floor, generator) for _ in range(count)])
        # keep levels in [0, a] and read them from the top: x = a - level
        window = rows[:, depth:][:, ::-1]
        return np.column_stack((window, window @ centres / (centres @ centres)))

    mean_row, se_row = mc_estimate(estimator, n_paths, workers, rng)
    field = _profile_field(x_edges, mean_row, se_row)
    _LOGGER.info(f"First Ray-Knight profile slope {field.fit[0]:.4f} +- {field.fit[1]:.4f} over {n_paths} paths")
    return field


def ray_knight_second(b: float = 0.5, n_paths: int = 1000, dt: float = 1e-4, bin_width: float = DEFAULT_BIN_WIDTH,
                      rng: RngSpec = RngSpec(0), workers: int = 1, half_range: float = 0.3,
                      stop_window: float = STOP_WINDOW) -> LocalTimeField:
    """Mean of x -> L_x(tau_b) near 0, run until the local time at 0 reaches b; expected profile b.

    The fit is each path's average occupation over the bins away from 0.
    """
    m = int(round(half_range / bin_width))
    edges = bin_width * (np.arange(-m, m + 2) - 0.5)
    away = np.ones(2 * m + 1, dtype=bool)
    away[m] = False

    def estimator(count: int, generator: np.random.Generator) -> np.ndarray:
        rows = np.array([_inverse_local_time_occupation(b, dt, edges, stop_window, generator) for _ in range(count)])
        return np.column_stack((rows, rows[:, away].mean(axis=1)))

    mean_row, se_row = mc_estimate(estimator, n_paths, workers, rng)
    field = _profile_field(edges, mean_row, se_row)
    _LOGGER.info(f"Second Ray-Knight profile level {field.fit[0]:.4f} +- {field.fit[1]:.4f} over {n_paths} paths")
    return field


# -- survival and conditioned occupation --------------------------------------

def survival_eigen(c: float, s: float, n_terms: int = 200) -> float:
    """P(2B from c stays inside (0, 1) up to time s), by the Dirichlet eigen-series.

    At times too short for n_terms to converge the reflection-principle image
    sum is used instead.
    """
    if n_terms < 25:
        raise DomainError(f"Survival series needs at least 25 terms, got {n_terms}")
    if not 0.0 < c < 1.0 or s < 0:
        raise DomainError(f"Survival needs c in (0, 1) and s >= 0, got c={c}, s={s}")
    if s == 0.0:
        return 1.0
    if s * n_terms ** 2 < SURVIVAL_SERIES_REACH:
        return _survival_images(c, s)
    k = np.arange(1, n_terms + 1)
    terms = 2.0 / (k * math.pi) * (1.0 - np.cos(k * math.pi)) * np.sin(k * math.pi * c) \
        * np.exp(-2.0 * k ** 2 * math.pi ** 2 * s)
    return float(np.sum(terms))


def _survival_images(c: float, s: float) -> float:
    sigma = 2.0 * math.sqrt(s)
    shifts = 2.0 * np.arange(-3, 4)
    survival = (ndtr((1.0 - c + shifts) / sigma) - ndtr((shifts - c) / sigma)
                - ndtr((1.0 + c + shifts) / sigma) + ndtr((c + shifts) / sigma))
    return float(np.sum(survival))


def survival_is_monotone(c_values: Sequence[float], s_values: Sequence[float], n_terms: int = 400) -> bool:
    """Survival decreases in s, and in c on [1/2, 1)."""
    c_values = sorted(c for c in c_values if c >= 0.5)
    s_values = sorted(s_values)
    table = np.array([[survival_eigen(c, s, n_terms) for s in s_values] for c in c_values])
    return bool(np.all(np.diff(table, axis=1) < 0) and np.all(np.diff(table, axis=0) < 0))


def _bridge_exit(start: np.ndarray, end: np.ndarray, barrier: float, variance: float) -> np.ndarray:
    """Probability that a Brownian bridge between two points on one side of barrier touches it."""
    gap = (start - barrier) * (end - barrier)
    return np.where(gap > 0, np.exp(-2.0 * gap / variance), 1.0)


def _simulate_z(dimension: int, c: float, s: float, dt: float, count: int,
                generator: np.random.Generator, keep_path: bool) -> tuple[np.ndarray, np.ndarray | None]:
    """Survival flags of Z inside (0, 1) up to s, and optionally the sampled Z paths."""
    steps = int(round(s / dt))
    sd = 2.0 * math.sqrt(dt)
    variance = sd * sd
    alive = np.ones(count, dtype=bool)
    paths = np.empty((count, steps + 1)) if keep_path else None
    if dimension == 0:
        z = np.full(count, float(c))
    else:
        planar = np.zeros((count, 2))
        planar[:, 0] = c
        z = np.abs(planar[:, 0])
    if keep_path:
        paths[:, 0] = z
    for k in range(1, steps + 1):
        if dimension == 0:
            following = z + sd * generator.standard_normal(count)
            exit_prob = _bridge_exit(z, following, 0.0, variance) + _bridge_exit(z, following, 1.0, variance)
        else:
            planar += sd * generator.standard_normal((count, 2))
            following = np.hypot(planar[:, 0], planar[:, 1])
            exit_prob = _bridge_exit(z, following, 1.0, variance)
        alive &= generator.random(count) >= np.minimum(exit_prob, 1.0)
        z = following
        if keep_path:
            paths[:, k] = z
    return alive, paths


def survival_mc(c: float, s: float, n_paths: int, dt: float = 1e-3, rng: RngSpec = RngSpec(0),
                workers: int = 1) -> tuple[float, float]:
    """Rejection estimate of survival_eigen(c, s) with bridge-corrected exits."""

    def estimator(count: int, generator: np.random.Generator) -> np.ndarray:
        flags = [_simulate_z(0, c, s, dt, min(BATCH_PATHS * 5, count - done), generator, False)[0]
                 for done in range(0, count, BATCH_PATHS * 5)]
        return np.concatenate(flags).astype(float)

    return mc_estimate(estimator, n_paths, workers, rng)


def mc_conditioned_occupation(dimension: int, c: float, s: float, n_paths: int, rng: RngSpec,
                              dt: float = 1e-3, bins: int = 50, workers: int = 1,
                              level: str = "Y") -> OccupationHistogram:
    """Occupation measure of paths of Z that stay inside the unit interval up to time s.

    With level "Y" each sample of Z is weighted by 1/z, which turns time spent
    by Z into time spent by the squared Bessel process. Histograms are
    normalized per path and averaged over accepted paths.
    """
    if dimension not in (0, 2):
        raise DomainError(f"Dimension must be 0 or 2, got {dimension}")
    if level not in ("Y", "Z"):
        raise DomainError(f"Level must be 'Y' or 'Z', got {level}")
    if not 0.0 < c < 1.0 or s <= 0:
        raise DomainError(f"Conditioning needs c in (0, 1) and s > 0, got c={c}, s={s}")
    edges = np.linspace(0.0, 1.0, bins + 1)

    def task(count: int, generator: np.random.Generator) -> tuple[np.ndarray, int]:
        total = np.zeros(bins)
        accepted = 0
        for done in range(0, count, BATCH_PATHS):
            alive, paths = _simulate_z(dimension, c, s, dt, min(BATCH_PATHS, count - done), generator, True)
            for path in paths[alive]:
                samples = path[:-1]
                weights = 1.0 / np.maximum(samples, 1e-12) if level == "Y" else np.ones(samples.size)
                hist, _ = np.histogram(samples, bins=edges, weights=weights)
                total += hist / hist.sum()
                accepted += 1
        return total, accepted

    parts = _run_workers(task, n_paths, workers, rng)
    accepted = sum(part[1] for part in parts)
    if accepted == 0:
        _LOGGER.error(f"No path of {n_paths} survived to s={s} (d={dimension}, c={c})")
        raise InfeasibleSimulationError(f"Zero accepted paths out of {n_paths}; acceptance rate below {1.0 / n_paths:.3e}")
    weights = sum(part[0] for part in parts) / accepted
    _LOGGER.info(f"Conditioned occupation d={dimension}, s={s}: accepted {accepted}/{n_paths}")
    return OccupationHistogram(bin_edges=edges, weights=weights, accepted=accepted, attempted=n_paths)


def ks_distance(histogram: OccupationHistogram, mu: DensityGrid) -> float:
    """Largest gap between the histogram CDF and the CDF of mu, at the bin edges."""
    target = cumulative_trapezoid(mu.density, mu.x, initial=0.0)
    target = target / target[-1]
    return float(np.max(np.abs(histogram.cdf() - np.interp(histogram.bin_edges, mu.x, target))))


# -- parallel plumbing ----------------------------------------------------------

def _split(n_paths: int, workers: int) -> list[int]:
    return [n_paths // workers + (1 if w < n_paths % workers else 0) for w in range(workers)]


def _run_workers(task: Callable[[int, np.random.Generator], Any], n_paths: int, workers: int,
                 rng: RngSpec) -> list[Any]:
    """Run task(count, generator) per worker on stream = worker index; results in worker order."""
    if workers < 1:
        raise DomainError(f"Need at least one worker, got {workers}")
    counts = _split(n_paths, workers)
    generators = [rng.for_worker(w).generator() for w in range(workers)]
    _LOGGER.debug(f"Splitting {n_paths} paths over {workers} worker(s): {counts}")
    if workers == 1:
        return [task(counts[0], generators[0])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, counts, generators))


def mc_estimate(estimator: Callable[[int, np.random.Generator], np.ndarray], n_paths: int, workers: int,
                rng: RngSpec) -> tuple[Any, Any]:
    """Mean and standard error of per-path values, merged deterministically across workers."""
    if n_paths < MIN_MC_PATHS:
        raise DomainError(f"mc_estimate needs at least {MIN_MC_PATHS} paths, got {n_paths}")
    count, centre, spread = 0, 0.0, 0.0
    for values in _run_workers(estimator, n_paths, workers, rng):
        values = np.asarray(values, dtype=float)
        n_w = values.shape[0]
        if n_w == 0:
            continue
        mean_w = values.mean(axis=0)
        spread_w = np.sum((values - mean_w) ** 2, axis=0)
        delta = mean_w - centre
        total = count + n_w
        centre = centre + delta * n_w / total
        spread = spread + spread_w + delta ** 2 * count * n_w / total
        count = total
    standard_error = np.sqrt(spread / (count - 1) / count)
    if np.ndim(centre) == 0:
        return float(centre), float(standard_error)
    return centre, standard_error


def write_histogram_csv(edges: np.ndarray, values: np.ndarray, path: Path | str) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HISTOGRAM_HEADER)
        for left, right, value in zip(edges[:-1], edges[1:], values):
            writer.writerow([f"{left:.17g}", f"{right:.17g}", f"{value:.17g}"])
    return path
