import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balancelab.characteristics import (
    BACKWARD,
    BOTH,
    CLOSED_FORM,
    EXACT_CORRIDOR,
    FORWARD,
    NUMERIC_ODE,
    build_lagrangian_param,
    corner_ladders,
    count_cover_intersections,
    cover_corner,
    diff_quotient_probe,
    extremal_trace,
    interval_images,
    lipschitz_probe,
    theta_of,
    trace,
)
from balancelab.field import build_field
from balancelab.regions import FOUR, as_fraction, build_tree, covered_measure

LOWER = 1 / (8 * math.e)


def centred_slope(path, t, h=1e-6):
    return (path.position(t + h) - path.position(t - h)) / (2 * h)


class TestCubicTraces:
    def test_cubic_branch(self, cubic_field):
        path = trace(cubic_field, (0.0, 1.0), (0.0, 1.0), FORWARD)
        assert path.provenance == [NUMERIC_ODE]
        for t in np.linspace(0, 1, 41):
            assert path.position(t) == pytest.approx((t + 1) ** 3, abs=1e-6)

    def test_zero_is_a_characteristic(self, cubic_field):
        path = trace(cubic_field, (0.0, 0.0), (0.0, 1.0), FORWARD)
        assert all(path.position(t) == 0.0 for t in np.linspace(0, 1, 11))

    def test_extremal_envelopes(self, cubic_field):
        top = extremal_trace(cubic_field, (0.0, 0.0), FORWARD, "max", t_span=(0.0, 1.0))
        bottom = extremal_trace(cubic_field, (0.0, 0.0), FORWARD, "min", t_span=(0.0, 1.0))
        for t in (0.25, 0.5, 0.75, 1.0):
            assert top.position(t) == pytest.approx(t ** 3, abs=1e-4)
            assert bottom.position(t) == 0.0

    def test_extremal_matches_unique_trace(self, cubic_field):
        plain = trace(cubic_field, (0.0, 1.0), (0.0, 1.0), FORWARD)
        top = extremal_trace(cubic_field, (0.0, 1.0), FORWARD, "max", t_span=(0.0, 1.0))
        for t in np.linspace(0, 1, 11):
            assert top.position(t) == pytest.approx(plain.position(t), abs=1e-9)

    def test_uniqueness_flag(self, cubic_field):
        assert not trace(cubic_field, (0.0, 1.0), (0.0, 1.0), FORWARD,
                         check_uniqueness=True).nonunique
        assert trace(cubic_field, (0.0, 0.0), (0.0, 1.0), FORWARD,
                     check_uniqueness=True).nonunique

    def test_bad_arguments(self, cubic_field):
        with pytest.raises(ValueError):
            trace(cubic_field, (0, 1), direction="sideways")
        with pytest.raises(ValueError):
            extremal_trace(cubic_field, (0, 1), extremum="median")

    @given(st.floats(0.2, 2.0))
    @settings(max_examples=15)
    def test_slope_consistency(self, x0):
        fld = build_field("cubic")
        path = trace(fld, (0.0, x0), (0.0, 0.5), FORWARD)
        for t in path.sample_times()[1:-1]:
            if 1e-5 < t < 0.5 - 1e-5:
                u = fld.eval_u(t, path.position(t))
                assert centred_slope(path, t) == pytest.approx(fld.flux.deriv(u), abs=1e-6)

    def test_quotients_tend_to_one(self, cubic_field):
        path = trace(cubic_field, (0.0, 1.0), (0.0, 1.0), FORWARD)
        qs = diff_quotient_probe(cubic_field, path, 0.5, [0.6, 0.51, 0.501, 0.4])
        assert all(q == pytest.approx(1.0, abs=1e-8) for q in qs)
        assert lipschitz_probe(path, [0.1, 0.01]) == pytest.approx([1.0, 1.0], abs=1e-8)

    def test_constant_path_in_zero_region(self, cubic_field):
        path = trace(cubic_field, (0.0, 0.0), (0.0, 1.0), FORWARD)
        assert lipschitz_probe(path, [0.1, 0.01]) == [0.0, 0.0]


class TestCantorInverseTraces:
    def test_path_follows_field(self, cantor_inverse_field):
        fld = cantor_inverse_field
        path = trace(fld, (0.0, 0.0), (0.0, 0.5), FORWARD)
        assert path.provenance == [CLOSED_FORM]
        for t in np.linspace(0.01, 0.49, 25):
            u = path.u_at(t)
            # u is the time of the Vitali clock: w(u(t)) = t
            assert fld.vitali.forward(u) == pytest.approx(t, abs=1e-9)
            assert fld.eval_u(t, path.position(t)) == pytest.approx(u, abs=fld.inversion_tolerance)
            assert centred_slope(path, t) == pytest.approx(fld.flux.deriv(u), abs=1e-5)

    @pytest.mark.parametrize("level", [3, 5, 7])
    def test_lipschitz_blowup(self, cantor_inverse_field, level):
        path = trace(cantor_inverse_field, (0.0, 0.0), (0.0, 0.5))
        scale = 2.0 ** (-2 * level - 1)
        q = lipschitz_probe(path, [scale], interval_images(cantor_inverse_field, level))[0]
        # a level-n interval of length (2^n + 1) / 2^(2n+1) is crossed in time 2^-(2n+1)
        expected = (2 ** level + 1) / 2 ** (2 * level + 1) / scale
        assert q == pytest.approx(expected, rel=1e-6)
        if level == 7:
            assert q >= 100

    def test_shift_family(self, cantor_inverse_field):
        fld = cantor_inverse_field
        taus = [0.05, 0.1, 0.2, 0.3]
        seeds = [(0.0, fld.flux_exact.eval(tau)) for tau in taus]
        fam = build_lagrangian_param(fld, seeds, (0.0, 0.25), branch="shift",
                                     theta_times=(0.0, 0.125, 0.25))
        assert fam.no_crossing() and fam.theta_increasing()
        for tau, row, path in zip(taus, fam.members, fam.paths):
            start = path.u_at(0.0)
            # the flux may be numerically flat around tau, so compare heights
            assert fld.flux_exact.eval(start) == pytest.approx(fld.flux_exact.eval(tau), abs=1e-12)
            for t, x in zip(fam.times, row):
                assert x == pytest.approx(fld.flux_exact.eval(t + start), abs=1e-12)
            assert path.u_at(0.2) - path.u_at(0.1) == pytest.approx(0.1, abs=1e-12)


class TestRegionTraces:
    def test_exact_provenance_and_slope(self, cantor_param_field):
        fld = cantor_param_field
        p = fld.tree.levels[1]
        t0 = float(as_fraction(p.a) + as_fraction(p.b) / 2)
        path = trace(fld, (t0, float(p.strip_height) / 2), direction=BOTH)
        assert set(path.provenance) == {EXACT_CORRIDOR}
        assert path.t_start == 0 and path.t_end == 1
        for t in np.linspace(t0 - 0.1, t0 + 0.1, 9):
            u = fld.eval_u(t, path.position(t))
            assert path.u_at(t) == pytest.approx(u, abs=1e-9)
            assert centred_slope(path, t) == pytest.approx(fld.flux.deriv(u), abs=1e-6)

    def test_single_intersection_depth_three(self, cantor_param_field):
        fld = cantor_param_field
        a3 = as_fraction(fld.tree.levels[3].a)
        rng = random.Random(11)
        for _ in range(200):
            start = (rng.uniform(0, 1), rng.uniform(0, 0.5))
            count, residence = count_cover_intersections(trace(fld, start), fld.tree, 3)
            assert count <= 1
            assert residence <= a3 + Fraction(1, 10 ** 9)

    def test_outside_path(self, cantor_param_field):
        path = trace(cantor_param_field, (0.5, 0.7))
        assert path.ended == "left-domain"
        assert count_cover_intersections(path, cantor_param_field.tree, 3) == (0, 0)

    def test_pullback_witness(self):
        rng = random.Random(2)
        starts = [(rng.uniform(0, 1), rng.uniform(0, 0.5)) for _ in range(20)]
        previous = None
        for depth in (1, 2, 3, 4):
            fld = build_field("cantor-param", depth)
            worst = max(count_cover_intersections(trace(fld, s), fld.tree, depth)[1]
                        for s in starts)
            assert worst <= as_fraction(fld.tree.levels[depth].a)
            assert float(covered_measure(build_tree(FOUR, depth), depth)) > LOWER
            if previous is not None:
                assert worst <= previous
            previous = worst

    def test_nondiff_ladders(self, nondiff_field):
        corner = cover_corner(nondiff_field)
        path = trace(nondiff_field, corner, direction=BACKWARD)
        ladders = corner_ladders(nondiff_field)
        zero = diff_quotient_probe(nondiff_field, path, corner[0], list(ladders["zero"].values()))
        assert zero == [0.0] * len(zero)
        steep = diff_quotient_probe(nondiff_field, path, corner[0],
                                    list(ladders["steep"].values()))
        for i, q in zip(ladders["steep"], steep):
            lv = nondiff_field.tree.levels[i]
            a, b = float(as_fraction(lv.a)), float(as_fraction(lv.b))
            assert q == pytest.approx((3 * a / 8) / (b + 3 * a / 2), abs=1e-9)
            if i >= 3:
                assert q >= 0.2


class TestLagrangianFamilies:
    def test_theta_of_zero_path(self):
        assert theta_of([0.0] * 7) == 0.0

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
    def test_theta_range(self, values):
        assert -2 < theta_of(values) < 2

    @pytest.mark.parametrize("scenario", ["cubic", "cantor-param", "nondiff"])
    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=8)
    def test_families_are_monotone(self, scenario, seed, request):
        fld = request.getfixturevalue(
            {"cubic": "cubic_field", "cantor-param": "cantor_param_field",
             "nondiff": "nondiff_field"}[scenario])
        rng = random.Random(seed)
        if scenario == "cubic":
            seeds = [(rng.uniform(0, 1), rng.uniform(-1, 1)) for _ in range(5)]
        else:
            top = 0.5 if scenario == "cantor-param" else 0.25
            seeds = [(rng.uniform(0.02, 0.98), rng.uniform(0.01, top - 0.01)) for _ in range(5)]
        fam = build_lagrangian_param(fld, seeds, (0.0, 1.0), samples=17, rng_seed=seed)
        assert fam.no_crossing()
        assert fam.theta_increasing()
        lo, hi = fam.y_domain
        assert -2 < lo <= hi < 2
        for t in (0.0, 0.37, 1.0):
            ys = np.linspace(lo, hi, 9)
            chis = [fam.chi(t, y) for y in ys]
            assert all(p <= q for p, q in zip(chis, chis[1:]))

    def test_clipping_removes_crossings(self, cubic_field):
        # two characteristics that cross: x = (t+1)^3 from (0, 1) and one started above it later
        seeds = [(0.0, 1.0), (1.0, 7.0)]
        fam = build_lagrangian_param(cubic_field, seeds, (0.0, 1.0), samples=9)
        assert fam.no_crossing()
