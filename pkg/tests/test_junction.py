import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from balancelab.flux import FluxModel, make_convex_flat, make_quadratic
from balancelab.junction import (
    DECREASING,
    INCREASING,
    JunctionFamily,
    UnattainableDisplacementError,
    build_junction,
    build_junction_log,
    eval_junction,
    junction_from_tau,
    profile_displacement,
    sample_junction,
)
from balancelab.regions import FIVE, level_params

QUAD = make_quadratic()


def state_route_displacement(curve):
    """Displacement from the state-variable integral, independent of the solver's time integral."""
    prof = curve.profile
    half = profile_displacement(curve.flux, 0.0, prof.udot_half, 0.0, 0.5 * curve.b,
                                U=prof.u_half, breakpoints=prof.breakpoints())
    return 2.0 * half


class TestProfileDisplacement:
    def test_unit_rate_gives_flux_increment(self):
        assert abs(profile_displacement(QUAD, 0.0, lambda s: 1.0, 0.0, 1.0) - 1.0) <= 1e-12

    def test_quadratic_ramp(self):
        # u = t^2 / 2 on [0, 1]
        assert abs(profile_displacement(QUAD, 0.0, lambda s: s, 0.0, 1.0) - 1 / 3) <= 1e-12

    def test_constant_flux(self):
        flat = FluxModel("constant", lambda z: 1.0, lambda z: 0.0, lambda z: 0.0, {}, ())
        assert profile_displacement(flat, 0.0, lambda s: 1.0 + s, 0.0, 2.0) == 0.0

    def test_nonpositive_rate_rejected(self):
        with pytest.raises(ValueError):
            profile_displacement(QUAD, 0.0, lambda s: s - 0.5, 0.0, 1.0)


class TestBuildJunction:
    def test_first_level_corridor(self):
        curve = build_junction(QUAD, 0.25, 1 / 48)
        assert abs(eval_junction(curve, 0.25)[0] - 1 / 48) <= 1e-9
        assert abs(state_route_displacement(curve) - 1 / 48) <= 1e-9

    def test_zero_displacement(self):
        curve = build_junction(QUAD, 0.25, 0.0, x0=0.3)
        for t in (0.0, 0.1, 0.25):
            assert eval_junction(curve, t) == (0.3, 0.0, 0.0)

    def test_bound_is_strict(self):
        with pytest.raises(UnattainableDisplacementError):
            build_junction(QUAD, 0.25, 1 / 32)

    def test_negative_target(self):
        with pytest.raises(ValueError):
            build_junction(QUAD, 0.25, -1e-3)

    def test_outside_interval(self):
        curve = build_junction(QUAD, 0.25, 1 / 48)
        with pytest.raises(ValueError):
            eval_junction(curve, 0.3)

    def test_big_case_midpoint_state(self):
        curve = build_junction(QUAD, 0.25, 1 / 48)
        assert curve.case == "big"
        assert abs(eval_junction(curve, 0.125)[1] - (0.125 - curve.tau)) <= 1e-15

    def test_case_selection(self):
        assert build_junction(QUAD, 0.25, 1e-4).case == "small"
        assert build_junction(QUAD, 0.25, 0.03).case == "big"

    @pytest.mark.parametrize("i", [1, 2, 3, 4])
    def test_decreasing_filler_minimum(self, i):
        a = float(level_params(FIVE, i).a.to_fraction())
        curve = junction_from_tau(make_convex_flat(), a, a / 8, "big", DECREASING)
        assert eval_junction(curve, a / 2)[1] == pytest.approx(-3 * a / 8, abs=1e-15)

    def test_log_target_far_below_binary64(self):
        f = make_convex_flat()
        curve = build_junction_log(f, 0.375, -2000.0)
        assert curve.log_c == pytest.approx(-2000.0, abs=1e-9)

    def test_csv_samples(self):
        rows = sample_junction(build_junction(QUAD, 0.25, 1 / 48), 11)
        assert rows.shape == (11, 4)
        assert rows[0, 0] == 0.0 and rows[-1, 0] == 0.25


admissible = st.tuples(st.floats(0.05, 1.0), st.floats(0.01, 0.99))


@given(admissible)
def test_random_targets_reconstructed_by_state_route(pair):
    b, frac = pair
    c = frac * 2 * QUAD.eval(b / 2)
    curve = build_junction(QUAD, b, c)
    assert abs(eval_junction(curve, b)[0] - c) <= 1e-9
    assert abs(state_route_displacement(curve) - c) <= 1e-9


@pytest.mark.parametrize("b, frac", [(0.3938461037929523, 0.5), (1.0, 0.5), (1.0, 0.501953125)])
def test_targets_at_the_case_boundary(b, frac):
    # half the bound is where the small and big families meet
    c = frac * 2 * QUAD.eval(b / 2)
    curve = build_junction(QUAD, b, c)
    assert abs(eval_junction(curve, b)[0] - c) <= 1e-12
    assert abs(state_route_displacement(curve) - c) <= 1e-9


@given(admissible)
def test_type_invariants(pair):
    b, frac = pair
    c = frac * 2 * QUAD.eval(b / 2)
    curve = build_junction(QUAD, b, c, x0=1.0)
    bound = 2 * QUAD.eval(b / 2)
    ts = [min(b, b * k / 99) for k in range(100)]
    for t in ts:
        x, u, udot = eval_junction(curve, t)
        assert abs(x - 1.0) < bound
        # u rises on the first half and mirrors back down on the second
        if t <= b / 2:
            assert -1e-12 <= udot <= 1.0 + 1e-9
        else:
            assert -1.0 - 1e-9 <= udot <= 1e-12
    for t in (0.0, b):
        _, u, udot = eval_junction(curve, t)
        assert u == 0.0 and udot == 0.0


@given(admissible)
def test_endpoint_flatness(pair):
    b, frac = pair
    c = frac * 2 * QUAD.eval(b / 2)
    curve = build_junction(QUAD, b, c)
    h = 1e-4
    # one-sided quotients of u vanish linearly in h, with slope max|u''| / 2
    curvature = 1 / curve.tau if curve.case == "big" else 2 * curve.tau
    for t0, t1 in ((0.0, h), (b, b - h)):
        q = abs(eval_junction(curve, t1)[1] - eval_junction(curve, t0)[1]) / h
        assert q <= 0.5 * curvature * h * (1 + 1e-9) + 1e-15


@given(admissible)
def test_speed_matches_flux_slope(pair):
    b, frac = pair
    c = frac * 2 * QUAD.eval(b / 2)
    curve = build_junction(QUAD, b, c)
    h = 1e-6 * b
    for k in range(1, 100):
        t = b * k / 100
        speed = (eval_junction(curve, t + h)[0] - eval_junction(curve, t - h)[0]) / (2 * h)
        u = eval_junction(curve, t)[1]
        assert abs(speed - QUAD.deriv(u)) <= 1e-6


class TestFamily:
    def test_parameter_round_trip(self):
        fam = JunctionFamily(QUAD, 0.25)
        for c in (1e-5, 1e-3, 0.02):
            s = fam.parameter_for(math.log(c))
            assert fam.log_displacement(s) == pytest.approx(math.log(c), abs=1e-9)

    def test_monotone_in_parameter(self):
        fam = JunctionFamily(QUAD, 0.25)
        values = [fam.log_displacement(s) for s in (0.1, 0.5, 1.0, 1.5, 1.9)]
        assert all(x < y for x, y in zip(values, values[1:]))

    def test_decreasing_orientation_moves_down(self):
        fam = JunctionFamily(QUAD, 0.25, DECREASING)
        curve = fam.curve(math.log(0.01), x0=0.5)
        assert eval_junction(curve, 0.25)[0] == pytest.approx(0.49, abs=1e-9)
        assert curve.orientation == DECREASING
        assert JunctionFamily(QUAD, 0.25, INCREASING).curve(math.log(0.01)).sign == 1.0
