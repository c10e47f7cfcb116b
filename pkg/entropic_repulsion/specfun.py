"""Special functions and numeric primitives used throughout the lab."""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import lru_cache
import logging
import math

import numpy as np
from scipy.integrate import simpson, trapezoid

from .const import DEFAULT_GRID_POINTS, SERIES_TERM_TOLERANCE, SINGULAR_CUTOFF
from .exceptions import DomainError

_LOGGER = logging.getLogger(__name__)

SERIES_LIMIT = 12.0
ROOT_BRACKET = (2.0, 3.0)
_MAX_SERIES_TERMS = 500


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values of a function on the uniform grid origin + k*spacing."""
    values: np.ndarray
    spacing: float
    origin: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("A sampled function needs a non-empty one-dimensional array of values")
        if not self.spacing > 0:
            raise DomainError(f"Grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "values", values)

    @classmethod
    def on_interval(cls, values: Sequence[float] | np.ndarray, a: float, b: float) -> SampledFunction:
        values = np.asarray(values, dtype=float)
        if values.size < 2:
            raise DomainError("Sampling an interval needs at least two values")
        return cls(values=values, spacing=(b - a) / (values.size - 1), origin=a)

    @classmethod
    def from_callable(
            cls, fn: Callable[[np.ndarray], np.ndarray], a: float = 0.0, b: float = 1.0,
            n: int = DEFAULT_GRID_POINTS) -> SampledFunction:
        return cls.on_interval(fn(np.linspace(a, b, n)), a, b)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> float:
        return self.origin + (self.size - 1) * self.spacing

    @property
    def grid(self) -> np.ndarray:
        grid = self.origin + self.spacing * np.arange(self.size)
        # pin the right endpoint so the grid covers the interval exactly
        grid[-1] = self.end
        return grid

    def with_values(self, values: np.ndarray) -> SampledFunction:
        return SampledFunction(values=values, spacing=self.spacing, origin=self.origin)


def _checked(x: float | np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        _LOGGER.error(f"Bessel evaluation received a non-finite argument: {x}")
        raise DomainError("Bessel functions need finite arguments")
    if np.any(arr < 0):
        raise DomainError("Bessel functions are evaluated for non-negative arguments only")
    return arr


def _power_series(x: np.ndarray, order: int) -> np.ndarray:
    quarter = -(x * x) / 4.0
    term = np.ones_like(x) if order == 0 else x / 2.0
    total = term.copy()
    for k in range(1, _MAX_SERIES_TERMS):
        term = term * quarter / (k * (k + order))
        total = total + term
        if np.all(np.abs(term) <= SERIES_TERM_TOLERANCE * np.maximum(np.abs(total), 1e-2)):
            break
    return total


def _hankel_asymptotic(x: float, order: int) -> float:
    mu = 4.0 * order * order
    p, q = 1.0, 0.0
    term = 1.0
    previous = math.inf
    for k in range(1, 60):
        term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) >= previous or abs(term) < 1e-17:
            break
        previous = abs(term)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q += sign * term
        else:
            p += sign * term
    chi = x - (order / 2.0 + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _bessel(x: float | np.ndarray, order: int) -> float | np.ndarray:
    arr = _checked(x)
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty_like(flat)
    small = flat <= SERIES_LIMIT
    if np.any(small):
        out[small] = _power_series(flat[small], order)
    for i in np.flatnonzero(~small):
        out[i] = _hankel_asymptotic(float(flat[i]), order)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def bessel_j0(x: float | np.ndarray) -> float | np.ndarray:
    """Bessel function of the first kind of order 0."""
    return _bessel(x, 0)


def bessel_j1(x: float | np.ndarray) -> float | np.ndarray:
    """Bessel function of the first kind of order 1."""
    return _bessel(x, 1)


@lru_cache(maxsize=None)
def find_bessel_root() -> float:
    """Smallest positive zero of J0, by bisection on [2, 3] then Newton with J0' = -J1."""
    lo, hi = ROOT_BRACKET
    f_lo = bessel_j0(lo)
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        f_mid = bessel_j0(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    for _ in range(20):
        delta = bessel_j0(root) / bessel_j1(root)
        root += delta
        if abs(delta) < 1e-15:
            break
    _LOGGER.debug(f"First zero of J0 located at {root!r}")
    return root


def integrate(f: SampledFunction) -> float:
    """Composite Simpson for an odd number of samples, trapezoid otherwise.

    The trapezoid fallback has O(spacing^2) error.
    """
    if f.size < 2:
        raise DomainError("Integration needs at least two samples")
    if f.size % 2 == 1:
        return float(simpson(f.values, dx=f.spacing))
    return float(trapezoid(f.values, dx=f.spacing))


def _positive_logs(values: Sequence[float] | np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        _LOGGER.error(f"Logarithmic fit received non-positive {name}: {arr}")
        raise DomainError(f"All {name} must be strictly positive")
    return np.log(arr)


def _check_fit_lengths(xs, ys) -> None:
    if len(xs) != len(ys) or len(xs) < 3:
        raise DomainError(f"A fit needs at least three paired points, got {len(xs)} and {len(ys)}")


def log_slope_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares line through (log x, log y); returns (slope, intercept)."""
    _check_fit_lengths(xs, ys)
    slope, intercept = np.polyfit(_positive_logs(xs, "abscissae"), _positive_logs(ys, "ordinates"), 1)
    return float(slope), float(intercept)


def decay_rate_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares line through (x, log y); the slope is the exponential rate."""
    _check_fit_lengths(xs, ys)
    slope, intercept = np.polyfit(np.asarray(xs, dtype=float), _positive_logs(ys, "ordinates"), 1)
    return float(slope), float(intercept)


@lru_cache(maxsize=None)
def singular_sine_constant(cutoff: float = SINGULAR_CUTOFF, n: int = DEFAULT_GRID_POINTS) -> float:
    """Z = integral of sin(pi x)^2 / x over [0, 1].

    Simpson on [cutoff, 1] plus the small-x piece, where the integrand is pi^2 x.
    """
    body = SampledFunction.from_callable(lambda x: np.sin(np.pi * x) ** 2 / x, cutoff, 1.0, n)
    z = integrate(body) + math.pi ** 2 * cutoff ** 2 / 2.0
    _LOGGER.debug(f"Normalizer Z = {z!r} (cutoff {cutoff}, {n} points)")
    return z
