"""Tests for speed constants, path cost and the detour inequality."""
import math

import numpy as np
import pytest

from entropic_repulsion.exceptions import ContractError, RangeError
from entropic_repulsion.speeds import (
    PathSpec,
    RateCurve,
    cost_ceiling_at_gamma_star,
    cost_rate_gap,
    critical_speed,
    default_lambdas,
    detour_check,
    detour_margin,
    detour_scan,
    gamma_bullet,
    gamma_circ,
    gamma_star,
    path_cost,
    speed_constants,
    speed_cost,
)

J0_ROOT = 2.404825557695773
RETURN = 2 * math.pi ** 2


def test_gamma_star(rate_table):
    value = gamma_star(rate_table)
    assert value == pytest.approx(4.586, rel=5e-3)
    assert value == pytest.approx(3.0 / (1.0 - 2.0 / J0_ROOT ** 2), rel=5e-3)


def test_gamma_star_is_stable_under_subsampling(rate_table):
    assert gamma_star(rate_table.subsample(2)) == pytest.approx(gamma_star(rate_table), rel=2e-3)


def test_gamma_bullet(rate_table):
    speed, cost = gamma_bullet(rate_table)
    assert speed == pytest.approx(3.513, rel=1e-2)
    assert cost < 13.26
    assert cost < RETURN
    # the minimizer at this speed is J0(j0 x)^2, with cost 2 j0^2
    assert cost == pytest.approx(2 * J0_ROOT ** 2, rel=1e-3)


def test_gamma_circ(rate_table):
    speed = gamma_circ(rate_table)
    assert speed == pytest.approx(1.983, rel=1e-2)
    assert RateCurve(rate_table).cost_rate(speed) == pytest.approx(RETURN, rel=1e-3)


def test_speed_constants_are_ordered(rate_table):
    constants = speed_constants(rate_table)
    assert constants.j0 == pytest.approx(J0_ROOT, abs=1e-12)
    assert 1.0 < constants.gamma_circ < constants.gamma_bullet < constants.gamma_star
    assert constants.Gamma_bullet <= cost_ceiling_at_gamma_star(rate_table)


def test_cost_rate_dominates_speed_cost(rate_table):
    assert np.all(cost_rate_gap(rate_table) >= 0)
    assert speed_cost(2.0) == 2.0


def test_rate_curve_range(rate_table):
    curve = RateCurve(rate_table)
    with pytest.raises(RangeError):
        curve.J(0.9)
    assert curve.J(0.5) == pytest.approx(rate_table.J[90], rel=1e-12)


def test_straight_path_cost(rate_table):
    speed, cost = gamma_bullet(rate_table)
    assert path_cost(PathSpec(breakpoints=((0, 0), (1, speed))), rate_table) == pytest.approx(cost, abs=1e-3)


def test_path_cost_is_invariant_under_refinement(rate_table):
    coarse = PathSpec(breakpoints=((0, 0), (1.0, 3.0), (2.0, 5.0)))
    fine = PathSpec(breakpoints=((0, 0), (0.5, 1.5), (1.0, 3.0), (1.25, 3.5), (2.0, 5.0)))
    assert path_cost(fine, rate_table) == pytest.approx(path_cost(coarse, rate_table), abs=1e-10)


@pytest.mark.parametrize("bend", [(1.0, 1.6), (1.0, 3.6), (0.5, 2.5)])
def test_bent_path_costs_more_than_straight(rate_table, bend):
    """Same endpoints, one breakpoint off the line: convexity of J makes the detour dearer."""
    straight = PathSpec(breakpoints=((0, 0), (2.0, 5.0)))
    bent = PathSpec(breakpoints=((0, 0), bend, (2.0, 5.0)))
    assert path_cost(bent, rate_table) > path_cost(straight, rate_table)


def test_path_at_gamma_star(rate_table):
    speed = gamma_star(rate_table)
    extent = 2.0
    path = PathSpec(breakpoints=((0, 0), (extent / speed, extent)))
    assert path_cost(path, rate_table) == pytest.approx(extent * RateCurve(rate_table).J(1 / speed), rel=1e-12)


def test_path_spec_validation(rate_table):
    with pytest.raises(ContractError):
        PathSpec(breakpoints=((0, 0), (1, 0.5)))
    with pytest.raises(ContractError):
        PathSpec(breakpoints=((0.1, 0), (1, 3)))
    with pytest.raises(RangeError):
        path_cost(PathSpec(breakpoints=((0, 0), (1, 50))), rate_table)


def test_detour_check_at_full_return(rate_table):
    """With lam = 1 the inequality compares the direct cost with 2 pi^2."""
    assert detour_check(3.0, 1.0, rate_table)
    assert not detour_check(1.5, 1.0, rate_table)


def test_detour_check_rejects_bad_fraction(rate_table):
    with pytest.raises(RangeError):
        detour_check(2.0, 0.0, rate_table)


def test_detour_scan_shape(rate_table):
    holds, worst_lambda, margin = detour_scan(3.0, rate_table)
    assert holds
    assert 0 < worst_lambda < 1
    assert margin > 0


def test_critical_speed_matches_gamma_circ(rate_table):
    speeds = np.linspace(1.2, 3.5, 47)
    assert critical_speed(rate_table, speeds) == pytest.approx(gamma_circ(rate_table), rel=1e-2)


def test_detour_margin_prices_the_return_leg_at_the_boosted_speed(rate_table):
    """The forward leg covers v in time 1 - lam, so it costs (1 - lam) w J(1/w) = v J((1 - lam)/v)."""
    curve = RateCurve(rate_table)
    v, lam = 2.5, 0.3
    expected = lam * RETURN + v * curve.J((1 - lam) / v) - curve.cost_rate(v)
    assert detour_margin(v, lam, rate_table) == pytest.approx(expected, rel=1e-12)


def test_extra_time_factor_on_the_return_leg_moves_the_critical_speed(rate_table):
    """Charging (1 - lam) v J((1 - lam)/v) instead puts the switch near 3.8, far from gamma_circ."""
    curve = RateCurve(rate_table)

    def holds(v):
        for lam in default_lambdas():
            alpha = (1 - lam) / v
            leg = (1 - lam) * v * curve.J(alpha) if alpha >= curve.alpha_min else 0.5 * v * v
            if lam * RETURN + leg - curve.cost_rate(v) <= 0:
                return False
        return True

    speeds = np.linspace(1.2, 5.0, 381)
    switch = next(float(v) for v in speeds if holds(v))
    assert 3.5 < switch < 4.1
    assert switch > 1.5 * gamma_circ(rate_table)
