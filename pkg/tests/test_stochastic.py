"""Tests for the Monte Carlo engine."""
import math

import numpy as np
import pytest
from scipy import integrate as scipy_integrate, special

from entropic_repulsion.exceptions import DomainError, InfeasibleSimulationError
from entropic_repulsion.measures import dirichlet_ground_state, mu_bullet_closed_form, mu_circ
from entropic_repulsion.specfun import decay_rate_fit, log_slope_fit
from entropic_repulsion.stochastic import (
    DiffusionPath,
    OccupationHistogram,
    RngSpec,
    besq0_ensemble,
    besq2_at,
    f_cdf,
    f_density,
    ks_distance,
    local_time_field,
    mc_conditioned_occupation,
    mc_estimate,
    ray_knight_first,
    ray_knight_second,
    sample_besq0,
    sample_besq2,
    survival_eigen,
    survival_is_monotone,
    survival_mc,
    time_change,
    write_histogram_csv,
)


def _close(estimate, target, error, k=3.0):
    return abs(estimate - target) <= k * error


def test_rng_spec_is_reproducible(rng):
    first = rng.generator().standard_normal(5)
    again = rng.generator().standard_normal(5)
    other = rng.for_worker(1).generator().standard_normal(5)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert rng.for_worker(3) == RngSpec(seed=rng.seed, stream=3)


def test_besq2_moments(rng):
    c, x = 1.0, 0.5
    samples = besq2_at(c, [x], 100_000, rng.generator())[:, 0]
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    assert _close(samples.mean(), c + 2 * x, se)
    assert samples.var(ddof=1) == pytest.approx(4 * c * x + 4 * x ** 2, rel=0.05)


def test_sample_besq2_path(rng):
    path = sample_besq2(0.5, 1.0, 1e-3, rng)
    assert path.values.size == 1001
    assert path.values[0] == pytest.approx(0.5)
    assert np.all(path.values >= 0)
    with pytest.raises(DomainError):
        sample_besq2(-1.0, 1.0, 1e-3, rng)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_besq0_is_a_martingale(rng, c):
    points = (0.5, 1.0, 2.0)
    ensemble = besq0_ensemble(c, 1e-3, 20_000, rng.generator(), points=points, x_max=2.0)
    for i, x in enumerate(points):
        values = ensemble.values_at[:, i]
        assert _close(values.mean(), c, math.sqrt(4 * c * x / values.size))


def test_besq_additivity(rng):
    """BESQ^2(c1) plus an independent BESQ^0(c2) has the moments of BESQ^2(c1 + c2)."""
    c1, c2, x = 0.5, 0.5, 0.5
    generator = rng.generator()
    squared = besq2_at(c1, [x], 20_000, generator)[:, 0]
    absorbed = besq0_ensemble(c2, 1e-3, 20_000, generator, points=(x,), x_max=x).values_at[:, 0]
    total = squared + absorbed
    se = total.std(ddof=1) / math.sqrt(total.size)
    assert _close(total.mean(), c1 + c2 + 2 * x, se)
    assert total.var(ddof=1) == pytest.approx(4 * (c1 + c2) * x + 4 * x ** 2, rel=0.08)


def test_sample_besq0_is_absorbed(rng):
    path = sample_besq0(0.1, 1e-4, rng)
    assert path.absorbed_at is not None
    assert path.values[path.absorbed_at] == 0.0
    assert path.values[0] == pytest.approx(0.1)
    assert np.all(path.values[:path.absorbed_at] > 0)


@pytest.mark.parametrize("c,step", [(0.0, 1e-4), (11.0, 1e-4), (1.0, 1e-2)])
def test_besq0_rejects_bad_parameters(rng, c, step):
    with pytest.raises(DomainError):
        sample_besq0(c, step, rng)
    with pytest.raises(DomainError):
        besq0_ensemble(c, step, 10, rng.generator())


@pytest.mark.parametrize("s", [0.1, 0.5, 1.0, 4.0])
def test_f_cdf_closed_form(s):
    assert f_cdf(1.0, s) == pytest.approx(special.erfc(1.0 / math.sqrt(8 * s)), abs=1e-9)


def test_f_density_shape():
    total, _ = scipy_integrate.quad(lambda u: f_density(1.0, u), 0.0, math.inf, limit=400)
    assert total == pytest.approx(1.0, abs=1e-6)
    s = np.geomspace(1e4, 1e6, 9)
    slope, _ = log_slope_fit(s, f_density(1.0, s))
    assert slope == pytest.approx(-1.5, abs=1e-3)
    grid = np.linspace(0.01, 0.5, 49_001)
    assert grid[np.argmax(f_density(1.0, grid))] == pytest.approx(1.0 / 12.0, abs=1e-4)
    with pytest.raises(DomainError):
        f_density(1.0, 0.0)


def _empirical_cdf(step, rng, points=(0.5, 1.0, 2.0)):
    integrals = besq0_ensemble(1.0, step, 20_000, rng.generator(), s_cap=max(points), x_max=100.0).integrals
    hits = (integrals[:, None] <= np.asarray(points)[None, :]).astype(float)
    return hits.mean(axis=0), hits.std(axis=0, ddof=1) / math.sqrt(integrals.size)


def test_total_integral_matches_f_cdf(rng):
    cdf, errors = _empirical_cdf(1e-3, rng)
    for value, error, s in zip(cdf, errors, (0.5, 1.0, 2.0)):
        assert _close(value, f_cdf(1.0, s), error)


@pytest.mark.slow
def test_total_integral_is_stable_under_step_halving():
    coarse, coarse_se = _empirical_cdf(1e-3, RngSpec(1))
    fine, fine_se = _empirical_cdf(5e-4, RngSpec(2))
    assert np.all(np.abs(coarse - fine) <= 3 * np.hypot(coarse_se, fine_se))


def test_time_change_of_constant_path():
    path = DiffusionPath(values=np.full(101, 2.0), step=0.01, dimension=2, start=2.0)
    changed = time_change(path)
    assert np.allclose(changed.values, 2.0)
    t = np.linspace(0.0, 2.0, 101)
    assert np.allclose(changed.clock, t / 2.0, atol=1e-12)


def test_time_change_of_linear_path():
    """For Y = 1 + x the running integral inverts to rho(t) = sqrt(1 + 2t) - 1."""
    x = np.linspace(0.0, 1.0, 1001)
    path = DiffusionPath(values=1.0 + x, step=1e-3, dimension=2, start=1.0)
    changed = time_change(path, n_out=777)
    t = np.linspace(0.0, 1.5, 777)
    assert np.allclose(changed.clock, np.sqrt(1.0 + 2.0 * t) - 1.0, atol=1e-10)
    assert np.allclose(changed.values, 1.0 + changed.clock, atol=1e-10)


def test_time_change_is_consistent_with_the_running_integral(rng):
    path = sample_besq2(1.0, 1.0, 1e-4, rng)
    changed = time_change(path, n_out=2001)
    cumulative = scipy_integrate.cumulative_trapezoid(path.values, dx=path.step, initial=0.0)
    recovered = np.interp(changed.clock, np.arange(path.values.size) * path.step, cumulative)
    assert np.max(np.abs(recovered - np.linspace(0.0, cumulative[-1], 2001))) < 1e-5


def test_time_changed_besq2_has_unit_diffusion_four(rng):
    """Z from a BESQ^2 path moves like 2 W: quadratic variation 4 t."""
    path = sample_besq2(1.0, 1.0, 1e-5, rng)
    changed = time_change(path, n_out=path.values.size // 20)
    horizon = changed.step * (changed.values.size - 1)
    assert np.sum(np.diff(changed.values) ** 2) == pytest.approx(4.0 * horizon, rel=0.1)


def test_time_change_rejects_short_paths():
    with pytest.raises(DomainError):
        time_change(DiffusionPath(values=np.array([1.0]), step=0.1, dimension=2, start=1.0))


def test_local_time_field_mass_identity(rng):
    positions = np.cumsum(rng.generator().normal(0.0, 0.01, 10_000))
    field = local_time_field(positions, dt=1e-4, bin_width=0.02)
    assert field.total_mass == pytest.approx(field.elapsed, rel=1e-12)
    assert field.elapsed == pytest.approx(1.0)
    with pytest.raises(DomainError):
        local_time_field([], dt=1e-4)


def test_first_ray_knight_profile_is_linear(rng):
    field = ray_knight_first(a=1.0, n_paths=2000, rng=rng)
    slope, error = field.fit
    assert _close(slope, 2.0, error)
    assert np.all(np.diff(field.occupation) > 0)


def test_second_ray_knight_profile_is_flat(rng):
    field = ray_knight_second(b=0.5, n_paths=2000, rng=rng)
    level, error = field.fit
    assert _close(level, 0.5, error)


def test_survival_series_at_time_zero():
    assert survival_eigen(0.5, 0.0) == 1.0
    assert survival_eigen(0.3, 1e-6) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("c", [0.2, 0.5, 0.9])
def test_survival_at_short_times_agrees_with_a_long_series(c):
    """Image sum below the reach of the default terms, a long eigen-series above it."""
    s = 4e-5
    assert survival_eigen(c, s) == pytest.approx(survival_eigen(c, s, n_terms=2000), abs=1e-12)
    assert survival_eigen(c, 1e-2) == pytest.approx(survival_eigen(c, 1e-2, n_terms=2000), abs=1e-12)


def test_survival_decay_rate():
    s = np.linspace(0.3, 1.0, 6)
    slope, _ = decay_rate_fit(s, [survival_eigen(0.5, float(v)) for v in s])
    assert slope == pytest.approx(-2 * math.pi ** 2, rel=1e-3)


@pytest.mark.parametrize("c,s,terms", [(0.5, 0.1, 10), (0.0, 0.1, 200), (0.5, -1.0, 200)])
def test_survival_series_rejects_bad_input(c, s, terms):
    with pytest.raises(DomainError):
        survival_eigen(c, s, n_terms=terms)


def test_survival_is_monotone():
    assert survival_is_monotone([0.5, 0.6, 0.7, 0.9], [0.02, 0.05, 0.1, 0.3])


def test_survival_mc_matches_series(rng):
    estimate, error = survival_mc(0.5, 0.25, 100_000, rng=rng)
    assert _close(estimate, survival_eigen(0.5, 0.25), error)


@pytest.mark.slow
def test_conditioned_occupation_without_drift(rng):
    histogram = mc_conditioned_occupation(0, 0.5, 0.4, 1_000_000, rng)
    assert histogram.accepted > 0
    assert ks_distance(histogram, mu_circ()) <= 0.05
    in_z = mc_conditioned_occupation(0, 0.5, 0.4, 1_000_000, rng, level="Z")
    assert ks_distance(in_z, dirichlet_ground_state()) <= 0.05


@pytest.mark.slow
def test_conditioned_occupation_in_the_plane(rng):
    histogram = mc_conditioned_occupation(2, 0.5, 0.5, 1_000_000, rng)
    assert ks_distance(histogram, mu_bullet_closed_form()) <= 0.10


@pytest.mark.slow
def test_planar_occupation_approaches_its_limit_as_s_grows(rng):
    distances = [ks_distance(mc_conditioned_occupation(2, 0.5, s, 1_000_000, rng), mu_bullet_closed_form())
                 for s in (0.25, 0.4, 0.5)]
    assert distances[0] > distances[1] > distances[2]


def test_conditioned_occupation_can_be_infeasible(rng):
    with pytest.raises(InfeasibleSimulationError):
        mc_conditioned_occupation(0, 0.5, 5.0, 100, rng)


@pytest.mark.parametrize("kwargs", [{"dimension": 1}, {"level": "X"}, {"c": 1.0}])
def test_conditioned_occupation_rejects_bad_arguments(rng, kwargs):
    arguments = {"dimension": 0, "c": 0.5, "s": 0.1, "n_paths": 100, "rng": rng} | kwargs
    with pytest.raises(DomainError):
        mc_conditioned_occupation(**arguments)


def test_ks_distance_of_exact_bin_masses():
    mu = mu_circ()
    edges = np.linspace(0.0, 1.0, 51)
    cdf = scipy_integrate.cumulative_trapezoid(mu.density, mu.x, initial=0.0)
    masses = np.diff(np.interp(edges, mu.x, cdf / cdf[-1]))
    histogram = OccupationHistogram(bin_edges=edges, weights=masses, accepted=1, attempted=1)
    assert ks_distance(histogram, mu) < 1e-9


def test_mc_estimate_of_a_constant(rng):
    estimate, error = mc_estimate(lambda count, generator: np.full(count, 3.0), 500, 2, rng)
    assert estimate == 3.0
    assert error == 0.0


def test_mc_estimate_is_reproducible(rng):
    def estimator(count, generator):
        return generator.exponential(size=count)

    assert mc_estimate(estimator, 1000, 3, rng) == mc_estimate(estimator, 1000, 3, rng)


def test_mc_estimate_error_shrinks_with_paths(rng):
    def estimator(count, generator):
        return generator.standard_normal(count)

    _, small = mc_estimate(estimator, 2000, 1, rng)
    _, large = mc_estimate(estimator, 4000, 2, rng)
    assert large / small == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_mc_estimate_needs_enough_paths(rng):
    with pytest.raises(DomainError):
        mc_estimate(lambda count, generator: np.zeros(count), 99, 1, rng)


def test_histogram_csv(tmp_path):
    path = write_histogram_csv(np.array([0.0, 0.5, 1.0]), np.array([0.25, 0.75]), tmp_path / "h.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_left,bin_right,value"
    assert len(lines) == 3
