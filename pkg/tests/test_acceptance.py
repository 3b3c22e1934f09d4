"""End-to-end acceptance checks, one per criterion, each with its runtime limit.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script;
either way one PASS/FAIL line is printed per criterion.
"""

import math
import random
import sys
import time
from fractions import Fraction

import pytest

from balancelab.characteristics import (
    BACKWARD,
    corner_ladders,
    count_cover_intersections,
    cover_corner,
    diff_quotient_probe,
    interval_images,
    lipschitz_probe,
    trace,
)
from balancelab.cli import family_check, junction_sweep
from balancelab.field import (
    CANTOR_INVERSE,
    CANTOR_PARAM,
    CUBIC_ROOT,
    NON_DIFF,
    SCENARIOS,
    build_field,
    continuity_report,
)
from balancelab.flux import make_quadratic
from balancelab.junction import UnattainableDisplacementError, build_junction
from balancelab.regions import (
    FIVE,
    FOUR,
    as_fraction,
    build_tree,
    closed_form_measure,
    covered_measure,
    level_params,
    limit_measure,
)
from balancelab.sources import (
    NotDifferentiable,
    TestFunction,
    along_path_check,
    estimate_broad_source,
    incompatibility_witness,
    weak_residual,
)

LOWER = 1 / (8 * math.e)
RESULTS = {}


def parameters_quadratic():
    p1, p2 = level_params(FOUR, 1), level_params(FOUR, 2)
    ok = (p1.a, p1.c, p1.d, p1.e) == (Fraction(3, 8), Fraction(1, 48), 16, Fraction(1, 2))
    ok &= (p2.a, p2.c, p2.d, p2.e) == (Fraction(5, 32), Fraction(1, 960), 16, Fraction(1, 4))
    ok &= all(level_params(FOUR, i).b == Fraction(1, 2 ** (2 * i)) for i in (1, 2))
    return ok, f"a1={p1.a} c1={p1.c} a2={p2.a} c2={p2.c} b=({p1.b}, {p2.b})"


def measure_quadratic():
    tree = build_tree(FOUR, 8)
    values = [covered_measure(tree, i) for i in range(9)]
    ok = values == [closed_form_measure(FOUR, i) for i in range(9)]
    ok &= all(x > y for x, y in zip(values, values[1:]))
    ok &= all(float(v) > LOWER for v in values)
    lim = limit_measure(FOUR, 12)
    ok &= abs(lim.estimate - 0.10486) <= 1e-3
    return ok, f"limit={lim.estimate:.6f} min={float(values[-1]):.6f} floor={LOWER:.6f}"


def parameters_flat_contact():
    p1, p2 = level_params(FIVE, 1), level_params(FIVE, 2)
    ok = as_fraction(p1.c) == Fraction(1, 256) and p1.d == 63
    ok &= as_fraction(p2.c) == Fraction(1, 2 ** 32) and p2.d == 2 ** 24 - 1
    ok &= all(level_params(FIVE, i - 1).c == level_params(FIVE, i).c * (1 + level_params(FIVE, i).d)
              for i in range(1, 7))
    lim = limit_measure(FIVE)
    ok &= abs(lim.estimate - 0.123047) <= 1e-4 and lim.estimate > LOWER
    return ok, f"limit={lim.estimate:.6f}"


def junction_solver():
    sweep = junction_sweep(20, seed=0, samples=100)
    flux = make_quadratic()
    try:
        build_junction(flux, 0.5, 2 * flux.eval(0.25))
        rejected = False
    except UnattainableDisplacementError:
        rejected = True
    ok = (sweep["displacement_error"] <= 1e-9 and sweep["endpoint_error"] <= 1e-6
          and sweep["rate_in_range"] and rejected)
    return ok, (f"disp_err={sweep['displacement_error']:.2e} "
                f"end_err={sweep['endpoint_error']:.2e} rejected={rejected}")


def single_intersection():
    fld = build_field(CANTOR_PARAM, 4)
    a4 = as_fraction(fld.tree.levels[4].a)
    rng = random.Random(0)
    worst_count, worst_time = 0, Fraction(0)
    for _ in range(200):
        path = trace(fld, (rng.uniform(0, 1), rng.uniform(0, 0.5)))
        count, residence = count_cover_intersections(path, fld.tree, 4)
        worst_count, worst_time = max(worst_count, count), max(worst_time, residence)
    ok = worst_count <= 1 and float(worst_time) <= float(a4) + 1e-9
    return ok, f"max_count={worst_count} max_residence={float(worst_time):.6f} a4={float(a4):.6f}"


def non_differentiability():
    fld = build_field(NON_DIFF, 4)
    corner = cover_corner(fld)
    path = trace(fld, corner, direction=BACKWARD)
    ladders = corner_ladders(fld)
    zero = diff_quotient_probe(fld, path, corner[0], list(ladders["zero"].values()))
    steep = diff_quotient_probe(fld, path, corner[0], list(ladders["steep"].values()))
    ok = all(q == 0.0 for q in zero)
    for i, q in zip(ladders["steep"], steep):
        a, b = as_fraction(fld.tree.levels[i].a), as_fraction(fld.tree.levels[i].b)
        ok &= abs(q - float((3 * a / 8) / (b + 3 * a / 2))) <= 1e-9
        if i >= 3:
            ok &= q >= 0.2
    steps = [t - corner[0] for lad in ladders.values() for t in lad.values()]
    ok &= isinstance(estimate_broad_source(fld, corner, steps, path=path), NotDifferentiable)
    return ok, "steep=" + ", ".join(f"{q:.5f}" for q in steep)


def holder_failure():
    fld = build_field(NON_DIFF, 2)
    pair = next(p for p in continuity_report(fld, levels=2).adversarial if p.level == 2)
    ratio = pair.ratio(0.5)
    return ratio >= 1e7, f"ratio={ratio:.4e}"


def cantor_inverse_scenario():
    fld = build_field(CANTOR_INVERSE)
    rng = random.Random(0)
    worst = 0.0
    for _ in range(10):
        rx, rt = rng.uniform(0.05, 0.2), rng.uniform(0.05, 0.3)
        phi = TestFunction((rng.uniform(0.3, 0.7), rng.uniform(rx, fld.flux_exact.total - rx)),
                           (rt, rx))
        worst = max(worst, abs(weak_residual(fld, 1.0, phi, 1e-8)))
    path = trace(fld, (0.0, 0.0), (0.0, 0.5))
    lip = lipschitz_probe(path, [2.0 ** -15], interval_images(fld, 7))[0]
    shift = trace(fld, (0.0, fld.flux_exact.eval(0.1)), (0.0, 0.5), branch="shift")
    budget = 2 * fld.inversion_tolerance
    defect = along_path_check(shift, 1.0, [(0.0, 0.25), (0.25, 0.5)], budget=budget)
    witness = incompatibility_witness(fld)
    ok = (worst <= 5e-5 and lip >= 100 and defect.passed and witness.conflicting
          and witness.conflict_measure >= Fraction(2, 5))
    return ok, (f"weak={worst:.2e} lip={lip:.1f} shift_defect={defect.max_residual:.2e} "
                f"conflict={float(witness.conflict_measure):.5f}")


def cubic_scenario():
    fld = build_field(CUBIC_ROOT)
    quad_tol = 1e-10
    res = abs(weak_residual(fld, 1.0, TestFunction((0.5, 0.6), (0.4, 0.5)), quad_tol))
    zero = trace(fld, (0.0, 0.0), (0.0, 1.0))
    windows = [(0.0, 0.25), (0.25, 1.0)]
    bad = along_path_check(zero, 1.0, windows)
    lengths = all(abs(d - (t2 - t1)) <= 1e-9 for t1, t2, d in bad.details)
    good = along_path_check(zero, lambda t, x: 1.0 if x != 0 else 0.0, windows)
    est = estimate_broad_source(fld, (0.5, 0.3))
    ok = (res <= quad_tol and lengths and not bad.passed and good.max_residual <= 1e-9
          and not isinstance(est, NotDifferentiable) and abs(est - 1) <= 1e-6)
    return ok, f"weak={res:.2e} broad_estimate={est}"


def lagrangian_families():
    out = []
    ok = True
    for scenario in SCENARIOS:
        fld = build_field(scenario, 4 if scenario == NON_DIFF else 3)
        rng = random.Random(scenario)
        start = time.perf_counter()
        for _ in range(50):
            r = family_check(fld, scenario, rng)
            ok &= r["no_crossing"] and r["theta_increasing"] and r["theta_in_range"]
        elapsed = time.perf_counter() - start
        ok &= elapsed < 60
        out.append(f"{scenario}={elapsed:.1f}s")
    return ok, " ".join(out)


CRITERIA = [
    (1, "quadratic parameters", parameters_quadratic, 1),
    (2, "quadratic covered measure", measure_quadratic, 5),
    (3, "flat-contact parameters", parameters_flat_contact, 5),
    (4, "junction solver", junction_solver, 10),
    (5, "single intersection", single_intersection, 60),
    (6, "non-differentiability", non_differentiability, 30),
    (7, "Holder failure", holder_failure, 5),
    (8, "Cantor-inverse scenario", cantor_inverse_scenario, 60),
    (9, "cubic scenario", cubic_scenario, 10),
    (10, "Lagrangian families", lagrangian_families, 60 * len(SCENARIOS)),
]


def evaluate(number, fn, limit):
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    passed = bool(ok) and elapsed < limit
    line = (f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  "
            f"({elapsed:.2f} s, limit {limit} s)  {detail}")
    RESULTS[number] = line
    return passed, line


@pytest.mark.parametrize("number, label, fn, limit", CRITERIA,
                         ids=[f"{n:02d}-{label.replace(' ', '-')}" for n, label, _, _ in CRITERIA])
def test_criterion(number, label, fn, limit):
    passed, line = evaluate(number, fn, limit)
    print(line)
    assert passed, line


if __name__ == "__main__":
    failures = 0
    for number, _, fn, limit in CRITERIA:
        passed, line = evaluate(number, fn, limit)
        print(line, flush=True)
        failures += not passed
    sys.exit(1 if failures else 0)
