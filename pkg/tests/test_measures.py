"""Tests for densities, rate functionals and tilt maps."""
import math

import numpy as np
import pytest

from entropic_repulsion.exceptions import ContractError, DomainError
from entropic_repulsion.measures import (
    INFINITE_RATE,
    DensityGrid,
    dirichlet_ground_state,
    functional_I0,
    functional_I0_tilted,
    functional_I2,
    functional_I2_tilted,
    inverse_moment,
    make_tent,
    mean,
    measure_stats,
    mu_bullet_closed_form,
    mu_circ,
    mu_star,
    read_density_csv,
    tail_mass,
    tilt,
    untilt,
    wirtinger_gap,
    write_density_csv,
)
from entropic_repulsion.specfun import SampledFunction, find_bessel_root, integrate

J0_ROOT = 2.404825557695773
X = np.linspace(0.0, 1.0, 2001)


def _mass(mu: DensityGrid) -> float:
    return integrate(mu.g.with_values(mu.density))


def test_extremal_densities_are_normalized():
    for mu in (mu_star(), mu_circ(), mu_bullet_closed_form(), dirichlet_ground_state(), make_tent(0.5)):
        assert mu.normalized
        assert _mass(mu) == pytest.approx(1.0, abs=1e-8)


def test_unnormalized_flag_is_checked():
    g = SampledFunction.on_interval(2.0 * np.ones(11), 0.0, 1.0)
    with pytest.raises(ContractError):
        DensityGrid(g=g, normalized=True)
    with pytest.raises(DomainError):
        DensityGrid(g=g.with_values(-np.ones(11)), normalized=False)


def test_mean_needs_normalized_density():
    raw = DensityGrid(g=SampledFunction.on_interval(2.0 * np.ones(11), 0.0, 1.0), normalized=False)
    with pytest.raises(ContractError):
        mean(raw)


def test_mu_star_rate_and_mean():
    mu = mu_star()
    assert functional_I2(mu) == pytest.approx(J0_ROOT ** 2 / 2, abs=1e-4)
    assert mean(mu) == pytest.approx((1 - 2 / J0_ROOT ** 2) / 3, abs=1e-6)


def test_mu_circ_equality_case():
    mu = mu_circ()
    assert functional_I0(mu) - 2 * math.pi ** 2 * mean(mu) == pytest.approx(0.0, abs=1e-6)


def test_tent_values():
    half = make_tent(0.5)
    assert functional_I2(half) == pytest.approx(12.0, abs=1e-3)
    assert half.g.values.max() == pytest.approx(math.sqrt(3.0), abs=1e-12)
    assert mean(make_tent(0.3)) == pytest.approx(0.3, abs=1e-10)


def test_narrow_tent_mean_approaches_centre():
    assert mean(make_tent(0.9, half_width=1e-3)) == pytest.approx(0.9, abs=1e-3)


@pytest.mark.parametrize("alpha,width", [(0.0, None), (1.0, None), (0.5, 0.6), (0.3, -0.1)])
def test_tent_rejects_bad_arguments(alpha, width):
    with pytest.raises(DomainError):
        make_tent(alpha, half_width=width)


def test_functionals_are_infinite_without_boundary_zeros():
    uniform = DensityGrid.from_density(np.ones_like(X))
    assert functional_I2(uniform) == INFINITE_RATE
    assert functional_I0(mu_star()) == INFINITE_RATE
    assert math.isfinite(functional_I2(mu_star()))


def test_mu_bullet_closed_form_cost():
    """Gamma = I2 / mean of J0(j0 x)^2 equals 2 j0^2."""
    mu = mu_bullet_closed_form()
    assert functional_I2(mu) / mean(mu) == pytest.approx(2 * find_bessel_root() ** 2, rel=1e-5)


def test_tilt_maps_ground_state_to_mu_circ():
    assert np.allclose(tilt(dirichlet_ground_state()).density, mu_circ().density, atol=1e-6)
    assert np.allclose(untilt(mu_circ()).density, dirichlet_ground_state().density, atol=1e-6)


def test_tilt_round_trips():
    for mu in (make_tent(0.6), make_tent(0.5, half_width=0.45)):
        assert np.allclose(untilt(tilt(mu)).density, mu.density, atol=1e-8)
        assert np.allclose(tilt(untilt(mu)).density, mu.density, atol=1e-8)


def test_tilt_mean_is_inverse_moment():
    mu = make_tent(0.5, half_width=0.45)
    inside = X > 0
    direct = integrate(SampledFunction.on_interval(np.where(inside, mu.density / np.where(inside, X, 1.0), 0.0),
                                                   0.0, 1.0))
    assert mean(tilt(mu)) == pytest.approx(1.0 / direct, abs=1e-8)
    assert inverse_moment(mu) == pytest.approx(direct, rel=1e-8)


def test_tilt_diverges_when_density_is_positive_at_zero():
    with pytest.raises(DomainError):
        tilt(mu_star())


def test_tilted_rates():
    """Tilted rates evaluate the rate of the image density divided by its mean."""
    ground = dirichlet_ground_state()
    assert functional_I0_tilted(ground) == pytest.approx(2 * math.pi ** 2, abs=1e-5)
    mu = untilt(mu_bullet_closed_form())
    assert functional_I2_tilted(mu) == pytest.approx(2 * find_bessel_root() ** 2, rel=1e-4)


def test_wirtinger_gap_values():
    assert wirtinger_gap(SampledFunction.from_callable(lambda x: np.sin(np.pi * x))) == pytest.approx(0.0, abs=1e-6)
    second = SampledFunction.from_callable(lambda x: np.sin(2 * np.pi * x))
    assert wirtinger_gap(second) == pytest.approx(1.5 * math.pi ** 2, abs=1e-4)
    with pytest.raises(DomainError):
        wirtinger_gap(SampledFunction.from_callable(lambda x: 1.0 + x))


def test_wirtinger_gap_is_non_negative_for_random_polynomials():
    rng = np.random.default_rng(11)
    for _ in range(100):
        coefficients = rng.normal(size=rng.integers(1, 6))
        h = SampledFunction.from_callable(lambda x: x * (1 - x) * np.polynomial.polynomial.polyval(x, coefficients))
        assert wirtinger_gap(h) >= -1e-8


def test_I2_is_strictly_convex_along_mixtures():
    rng = np.random.default_rng(5)
    centres = np.round(np.arange(0.1, 0.91, 0.01), 2)
    for _ in range(50):
        a, b = rng.choice(centres, size=2, replace=False)
        weight = rng.uniform(0.1, 0.9)
        mu1, mu2 = make_tent(float(a)), make_tent(float(b))
        mixture = DensityGrid(g=mu1.g.with_values(np.sqrt(weight * mu1.density + (1 - weight) * mu2.density)))
        bound = weight * functional_I2(mu1) + (1 - weight) * functional_I2(mu2)
        assert bound - functional_I2(mixture) >= 1e-6


def test_I0_lower_bound_is_attained_only_at_mu_circ():
    rng = np.random.default_rng(3)
    for _ in range(20):
        eps = rng.uniform(0.05, 0.3) * rng.choice([-1.0, 1.0])
        h = np.sin(np.pi * X) + eps * np.sin(2 * np.pi * X)
        density = np.zeros_like(X)
        density[1:] = h[1:] ** 2 / X[1:]
        mu = DensityGrid.from_density(density)
        assert functional_I0(mu) - 2 * math.pi ** 2 * mean(mu) > 1e-4


def test_tail_mass():
    mu = mu_star()
    assert tail_mass(mu, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert tail_mass(mu, 0.1) < tail_mass(mu, 0.2)
    # an unaligned width goes through the spline branch
    assert tail_mass(mu, 0.10003) == pytest.approx(tail_mass(mu, 0.1), rel=2e-3)
    with pytest.raises(DomainError):
        tail_mass(mu, 0.0)


def test_tail_mass_vanishes_left_of_the_support_edge():
    assert tail_mass(make_tent(0.3), 0.1) == pytest.approx(0.0, abs=1e-15)


def test_measure_stats():
    stats = measure_stats(make_tent(0.5), [0.5, 1.0])
    assert stats.mean == pytest.approx(0.5, abs=1e-10)
    assert stats.tail_mass[0.5] == pytest.approx(0.5, abs=1e-10)
    assert stats.tail_mass[1.0] == pytest.approx(1.0, abs=1e-10)


def test_density_csv(tmp_path):
    path = write_density_csv(mu_circ(), tmp_path / "mu_circ.csv")
    assert path.read_text().splitlines()[0] == "x,density"
    restored = read_density_csv(path)
    assert np.allclose(restored.density, mu_circ().density, atol=1e-12)
