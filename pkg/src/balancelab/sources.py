"""Checks of the Eulerian, Lagrangian and broad source notions against a field."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

from .characteristics import BOTH, CharacteristicPath, trace
from .field import CantorInverseField, SolutionField
from .numerics import integrate_adaptive

SourceMap = Callable[[float, float], float]


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


def _bump(s: float) -> float:
    return math.exp(-1.0 / (1.0 - s * s)) if abs(s) < 1.0 else 0.0


def _bump_slope(s: float) -> float:
    if abs(s) >= 1.0:
        return 0.0
    q = 1.0 - s * s
    return -2.0 * s / (q * q) * math.exp(-1.0 / q)


@lru_cache(maxsize=None)
def bump_mass() -> float:
    """Integral of exp(-1/(1-s^2)) over (-1, 1)."""
    return integrate_adaptive(_bump, -1.0, 1.0, 1e-15).value


@dataclass(frozen=True)
class TestFunction:
    """Product bump with unit integral supported on ``center +/- radii``."""

    center: tuple
    radii: tuple

    __test__ = False  # not a pytest class

    @property
    def scale(self) -> float:
        return 1.0 / (self.radii[0] * self.radii[1] * bump_mass() ** 2)

    @property
    def support(self) -> tuple:
        (tc, xc), (rt, rx) = self.center, self.radii
        return (tc - rt, tc + rt), (xc - rx, xc + rx)

    def _coords(self, t: float, x: float) -> tuple:
        return (t - self.center[0]) / self.radii[0], (x - self.center[1]) / self.radii[1]

    def phi(self, t: float, x: float) -> float:
        st, sx = self._coords(t, x)
        return self.scale * _bump(st) * _bump(sx)

    def phi_t(self, t: float, x: float) -> float:
        st, sx = self._coords(t, x)
        return self.scale * _bump_slope(st) * _bump(sx) / self.radii[0]

    def phi_x(self, t: float, x: float) -> float:
        st, sx = self._coords(t, x)
        return self.scale * _bump(st) * _bump_slope(sx) / self.radii[1]


@dataclass(frozen=True)
class ZeroTestFunction:
    """The zero function, for the trivial case of the weak form."""

    center: tuple = (0.0, 0.0)
    radii: tuple = (1.0, 1.0)

    __test__ = False

    @property
    def support(self) -> tuple:
        (tc, xc), (rt, rx) = self.center, self.radii
        return (tc - rt, tc + rt), (xc - rx, xc + rx)

    def phi(self, t, x):
        return 0.0

    phi_t = phi_x = phi


# ---------------------------------------------------------------------------
# Eulerian weak form
# ---------------------------------------------------------------------------


def _as_map(g) -> SourceMap:
    if callable(g):
        return g
    value = float(g)
    return lambda t, x: value


def weak_residual(fld: SolutionField, g, phi, quad_tol: float = 1e-10, *,
                  inner: str = "t") -> float:
    """Weak-form defect  int int (u phi_t + f(u) phi_x + g phi)  over the support of ``phi``.

    The double integral is iterated; ``inner`` picks the variable integrated
    first.  Integrating in ``t`` first suits fields that do not depend on
    ``t``, whose rough ``x``-dependence then multiplies an exact zero.
    """
    g = _as_map(g)
    (t_lo, t_hi), (x_lo, x_hi) = phi.support
    for t in (t_lo, t_hi):
        for x in (x_lo, x_hi):
            if not fld.contains(t, x):
                raise ValueError("test function support leaves the field domain")
    f = fld.flux.eval

    def density(t: float, x: float) -> float:
        p = phi.phi(t, x)
        pt, px = phi.phi_t(t, x), phi.phi_x(t, x)
        if p == 0.0 and pt == 0.0 and px == 0.0:
            return 0.0
        u = fld.eval_u(t, x)
        return u * pt + f(u) * px + g(t, x) * p

    if inner == "t":
        tol = quad_tol / (4.0 * (x_hi - x_lo))
        outer = lambda x: integrate_adaptive(lambda t: density(t, x), t_lo, t_hi, tol).value
        return integrate_adaptive(outer, x_lo, x_hi, 0.5 * quad_tol).value
    tol = quad_tol / (4.0 * (t_hi - t_lo))
    outer = lambda t: integrate_adaptive(lambda x: density(t, x), x_lo, x_hi, tol).value
    return integrate_adaptive(outer, t_lo, t_hi, 0.5 * quad_tol).value


# ---------------------------------------------------------------------------
# Along-characteristic checks
# ---------------------------------------------------------------------------

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass
class SourceCheckReport:
    notion: str
    max_residual: float
    details: list  # (t1, t2, defect)
    budget: float
    band: float = 10.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.budget

    @property
    def status(self) -> str:
        if self.passed:
            return PASS
        if self.max_residual <= self.band * self.budget:
            return INCONCLUSIVE
        return FAIL

    def to_dict(self) -> dict:
        return {
            "notion": self.notion,
            "max_residual": self.max_residual,
            "budget": self.budget,
            "status": self.status,
            "details": [list(map(float, d)) for d in self.details],
        }


def along_path_check(path: CharacteristicPath, g, windows: Sequence[tuple], *,
                     budget: float = 1e-9, notion: str = "lagrangian",
                     quad_tol: float = 1e-12) -> SourceCheckReport:
    """Compare the change of ``u`` along ``path`` with the integral of ``g`` per window."""
    g = _as_map(g)
    details = []
    for t1, t2 in windows:
        du = path.u_at(t2) - path.u_at(t1)
        integral = integrate_adaptive(lambda t: g(t, path.position(t)), float(t1), float(t2),
                                      quad_tol).value
        details.append((float(t1), float(t2), abs(du - integral)))
    worst = max((d[2] for d in details), default=0.0)
    return SourceCheckReport(notion, worst, details, budget)


# ---------------------------------------------------------------------------
# Broad source estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NotDifferentiable:
    quotients: tuple

    def __bool__(self) -> bool:
        return False


DEFAULT_LADDER = (1e-1, 1e-2, 1e-3, -1e-1, -1e-2, -1e-3)


def estimate_broad_source(fld: SolutionField, point, h_ladder: Sequence = DEFAULT_LADDER, *,
                          tol: float = 1e-6, path: Optional[CharacteristicPath] = None
                          ) -> Union[float, NotDifferentiable]:
    """Derivative of ``u`` along the characteristic through ``point``.

    Difference quotients are taken over the signed steps ``h_ladder``;
    when they agree within ``tol`` their mean is returned.
    """
    if path is None:
        path = trace(fld, point, direction=BOTH)
    t0 = point[0]
    u0 = path.u_at(t0)
    lo, hi = path.t_start, path.t_end
    quotients = []
    for h in h_ladder:
        t = Fraction(t0) + Fraction(h) if isinstance(t0, Fraction) else t0 + h
        if t < lo or t > hi:
            continue
        quotients.append((path.u_at(t) - u0) / float(h))
    if not quotients:
        raise ValueError("no ladder step stays inside the characteristic window")
    if max(quotients) - min(quotients) <= tol:
        return sum(quotients) / len(quotients)
    return NotDifferentiable(tuple(quotients))


# ---------------------------------------------------------------------------
# Incompatible sources on the Cantor-inverse field
# ---------------------------------------------------------------------------


@dataclass
class WitnessReport:
    shift_check: SourceCheckReport  # along x = f(t + tau) with source 1
    vertical_checks: list  # (s, constant u, SourceCheckReport for source 1)
    conflict_measure: Fraction  # |{t in [0, 1] : t + tau in the cover}|
    measure_bound: Fraction  # the limit measure of the fat Cantor set

    @property
    def conflicting(self) -> bool:
        return (
            self.shift_check.passed
            and all(r.status == FAIL for _, _, r in self.vertical_checks)
            and self.conflict_measure >= self.measure_bound
        )

    def to_dict(self) -> dict:
        return {
            "shift_check": self.shift_check.to_dict(),
            "vertical_checks": [
                {"s": float(s), "u": u, **r.to_dict()} for s, u, r in self.vertical_checks
            ],
            "conflict_measure": float(self.conflict_measure),
            "measure_bound": float(self.measure_bound),
            "conflicting": self.conflicting,
        }


def cover_points(fld: CantorInverseField, level: int) -> list:
    """Right endpoints of the removed gaps of levels ``1..level`` (points of the set)."""
    return [hi for lvl in fld.cantor.gaps[:level] for _, hi in lvl]


def incompatibility_witness(fld: CantorInverseField, tau: float = 0.0, *,
                            window: tuple = (0.0, 0.5), vertical_level: int = 2,
                            quad_tol: float = 1e-12) -> WitnessReport:
    if not isinstance(fld, CantorInverseField):
        raise ValueError("the witness needs the Cantor-inverse field")
    t1, t2 = window
    budget = 2.0 * fld.inversion_tolerance + 10.0 * quad_tol
    shift = trace(fld, (t1, fld.flux_exact.eval(tau + t1)), (t1, t2), branch="shift")
    windows = [(t1 + (t2 - t1) * k / 4, t1 + (t2 - t1) * (k + 1) / 4) for k in range(4)]
    shift_check = along_path_check(shift, 1.0, windows, budget=budget, quad_tol=quad_tol)
    verticals = []
    for s in cover_points(fld, vertical_level):
        x = fld.flux_exact.eval(float(s))
        path = trace(fld, (t1, x), (t1, t2), branch="vertical")
        rep = along_path_check(path, 1.0, [(t1, t2)], budget=budget, quad_tol=quad_tol)
        verticals.append((s, path.u_at(t1), rep))
    S = fld.cantor
    depth = fld.flux_exact.depth
    if tau == 0.0:
        measure = S.residual_measure(depth)
    else:
        # shifting by tau loses at most tau of the cover at the right end
        measure = S.residual_measure(depth) - Fraction(abs(tau))
    return WitnessReport(shift_check, verticals, measure, S.limit_measure)
