"""Flux functions and the fat Cantor machinery behind the Cantor-inverse flux."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .numerics import find_root, integrate_adaptive

LN2 = math.log(2.0)


@dataclass(frozen=True)
class FluxModel:
    """A C2 flux with its first two derivatives.

    ``branches`` maps a branch name to an interval on which ``deriv`` is
    strictly monotone; ``invert_deriv`` solves ``deriv(z) = slope`` there.
    ``log_abs_deriv`` gives ``log|f'(z)|`` directly for fluxes whose slope
    underflows binary64 near the origin.
    """

    name: str
    eval: Callable[[float], float]
    deriv: Callable[[float], float]
    deriv2: Callable[[float], float]
    branches: dict
    convexity_regions: tuple
    domain: tuple[float, float] = (-math.inf, math.inf)
    log_abs_deriv: Optional[Callable[[float], float]] = None
    closed_form_inverse: Optional[Callable[[float, str], float]] = None

    def invert_deriv(self, slope: float, branch: str) -> float:
        if self.closed_form_inverse is not None:
            return self.closed_form_inverse(slope, branch)
        lo, hi = self.branches[branch]
        g = lambda z: self.deriv(z) - slope
        return find_root(g, lo, hi, 1e-15)

    def log_deriv(self, z: float) -> float:
        if self.log_abs_deriv is not None:
            return self.log_abs_deriv(z)
        d = abs(self.deriv(z))
        return math.log(d) if d > 0 else -math.inf

    def mirrored(self) -> "FluxModel":
        """The flux ``z -> f(-z)``, used for curves along which ``u`` decreases."""
        f, d1, d2, ld = self.eval, self.deriv, self.deriv2, self.log_deriv
        branches = {k: (-hi, -lo) for k, (lo, hi) in self.branches.items()}
        regions = tuple((-hi, -lo, tag) for lo, hi, tag in reversed(self.convexity_regions))
        return FluxModel(
            name=f"mirror({self.name})",
            eval=lambda z: f(-z),
            deriv=lambda z: -d1(-z),
            deriv2=lambda z: d2(-z),
            branches=branches,
            convexity_regions=regions,
            domain=(-self.domain[1], -self.domain[0]),
            log_abs_deriv=lambda z: ld(-z),
        )

    def region_of(self, z: float) -> str:
        for lo, hi, tag in self.convexity_regions:
            if lo <= z <= hi:
                return tag
        return "unknown"


def make_quadratic() -> FluxModel:
    """f(z) = z**2, globally convex."""

    def log_abs(z: float) -> float:
        return math.log(2.0 * abs(z)) if z != 0 else -math.inf

    return FluxModel(
        name="quadratic",
        eval=lambda z: z * z,
        deriv=lambda z: 2.0 * z,
        deriv2=lambda z: 2.0,
        branches={"positive": (0.0, math.inf), "all": (-math.inf, math.inf)},
        convexity_regions=((-math.inf, math.inf, "convex"),),
        log_abs_deriv=log_abs,
        closed_form_inverse=lambda s, branch: 0.5 * s,
    )


def make_cubic() -> FluxModel:
    """f(u) = u**3 with an inflection point at the origin."""

    def inverse(slope: float, branch: str) -> float:
        if slope < 0:
            raise ValueError("f' = 3u^2 takes no negative values")
        root = math.sqrt(slope / 3.0)
        return -root if branch == "negative" else root

    return FluxModel(
        name="cubic",
        eval=lambda u: u ** 3,
        deriv=lambda u: 3.0 * u * u,
        deriv2=lambda u: 6.0 * u,
        branches={"positive": (0.0, math.inf), "negative": (-math.inf, 0.0)},
        convexity_regions=((-math.inf, 0.0, "concave"), (0.0, math.inf, "convex")),
        closed_form_inverse=inverse,
    )


# ---------------------------------------------------------------------------
# Flat-contact convex flux
# ---------------------------------------------------------------------------

# f'' changes sign at z = ln2/2 on the right branch and at |z|^3 = 3 ln2 / 4 on the left
CONVEX_FLAT_RIGHT_EDGE = LN2 / 2.0
CONVEX_FLAT_LEFT_EDGE = -((3.0 * LN2 / 4.0) ** (1.0 / 3.0))


@dataclass(frozen=True)
class FlatValue:
    value: float
    underflow: bool


def _flat_exponent(z: float) -> float:
    """Natural-log of f(z) for the flat-contact flux (``-inf`` at 0)."""
    if z == 0:
        return -math.inf
    if z > 0:
        return -LN2 * (1.0 / z + 1.0)
    return -LN2 * (1.0 / (-z) ** 3 + 1.0)


def convex_flat_value(z: float) -> FlatValue:
    """Evaluate 2^(-1/z-1) (z >= 0) or 2^(-1/|z|^3-1) (z < 0), flagging underflow."""
    if z == 0:
        return FlatValue(0.0, True)
    expo = _flat_exponent(z)
    value = math.exp(expo)
    return FlatValue(value, value == 0.0)


def _flat_eval(z: float) -> float:
    return convex_flat_value(z).value


def _flat_log_deriv(z: float) -> float:
    if z == 0:
        return -math.inf
    if z > 0:
        return _flat_exponent(z) + math.log(LN2) - 2.0 * math.log(z)
    y = -z
    return _flat_exponent(z) + math.log(3.0 * LN2) - 4.0 * math.log(y)


def _flat_deriv(z: float) -> float:
    if z == 0:
        return 0.0
    mag = math.exp(_flat_log_deriv(z))
    return mag if z > 0 else -mag


def _flat_deriv2(z: float) -> float:
    if z == 0:
        return 0.0
    f = math.exp(_flat_exponent(z))
    if f == 0.0:
        return 0.0
    if z > 0:
        return f * (LN2 ** 2 / z ** 4 - 2.0 * LN2 / z ** 3)
    y = -z
    return f * (9.0 * LN2 ** 2 / y ** 8 - 12.0 * LN2 / y ** 5)


def make_convex_flat() -> FluxModel:
    """Convex near 0 with every derivative vanishing at the origin.

    The formula is only convex on ``[CONVEX_FLAT_LEFT_EDGE, CONVEX_FLAT_RIGHT_EDGE]``;
    outside that window the declared region tag is ``concave``.
    """
    return FluxModel(
        name="convex_flat",
        eval=_flat_eval,
        deriv=_flat_deriv,
        deriv2=_flat_deriv2,
        branches={
            "positive": (0.0, CONVEX_FLAT_RIGHT_EDGE),
            "negative": (CONVEX_FLAT_LEFT_EDGE, 0.0),
        },
        convexity_regions=(
            (-1.0, CONVEX_FLAT_LEFT_EDGE, "concave"),
            (CONVEX_FLAT_LEFT_EDGE, CONVEX_FLAT_RIGHT_EDGE, "convex"),
            (CONVEX_FLAT_RIGHT_EDGE, 1.0, "concave"),
        ),
        domain=(-1.0, 1.0),
        log_abs_deriv=_flat_log_deriv,
    )


# ---------------------------------------------------------------------------
# Fat Cantor sets
# ---------------------------------------------------------------------------


class InvalidScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class GapSchedule:
    """Level ``n`` removes ``2**(n-1)`` centred gaps of length ``first * ratio**(n-1)``."""

    first: Fraction = Fraction(1, 4)
    ratio: Fraction = Fraction(1, 4)

    def length(self, n: int) -> Fraction:
        return self.first * self.ratio ** (n - 1)

    def removed_through(self, depth: int) -> Fraction:
        return sum((2 ** (n - 1) * self.length(n) for n in range(1, depth + 1)), Fraction(0))

    def total_removed(self) -> Fraction:
        q = 2 * self.ratio
        if q >= 1:
            return Fraction(10**9)  # diverges
        return self.first / (1 - q)


@dataclass(frozen=True)
class FatCantorSet:
    """Depth-``depth`` cover of a Smith-Volterra-Cantor set in [0, 1].

    ``gaps[n-1]`` lists the open intervals removed at level ``n`` in
    increasing order; all endpoints are exact rationals.
    """

    schedule: GapSchedule
    depth: int
    gaps: tuple

    @property
    def limit_measure(self) -> Fraction:
        return 1 - self.schedule.total_removed()

    def residual_measure(self, d: int) -> Fraction:
        return 1 - self.schedule.removed_through(d)

    def interval_length(self, level: int) -> Fraction:
        """Length of each surviving interval after ``level`` removals."""
        return self.residual_measure(level) / 2 ** level

    def all_gaps(self) -> list:
        return sorted(g for level in self.gaps for g in level)

    def contains(self, z, depth: Optional[int] = None) -> bool:
        """Membership in the (closed) depth cover."""
        depth = self.depth if depth is None else depth
        z = Fraction(z)
        if not 0 <= z <= 1:
            return False
        lo, hi = Fraction(0), Fraction(1)
        for n in range(1, depth + 1):
            g = self.schedule.length(n)
            mid = (lo + hi) / 2
            glo, ghi = mid - g / 2, mid + g / 2
            if glo < z < ghi:
                return False
            lo, hi = (lo, glo) if z <= glo else (ghi, hi)
        return True

    def to_json(self) -> str:
        return json.dumps([[str(a), str(b)] for a, b in self.all_gaps()])

    @staticmethod
    def gaps_from_json(text: str) -> list:
        return [(Fraction(a), Fraction(b)) for a, b in json.loads(text)]


def make_fat_cantor(schedule: Optional[GapSchedule] = None, depth: int = 8) -> FatCantorSet:
    schedule = schedule or GapSchedule()
    if schedule.first <= 0 or schedule.ratio <= 0:
        raise InvalidScheduleError("gap lengths must be positive")
    if schedule.total_removed() >= 1:
        raise InvalidScheduleError("schedule removes total length >= 1")
    levels = []
    intervals = [(Fraction(0), Fraction(1))]
    for n in range(1, depth + 1):
        g = schedule.length(n)
        level, nxt = [], []
        for lo, hi in intervals:
            if g >= hi - lo:
                raise InvalidScheduleError(f"level-{n} gap does not fit its interval")
            mid = (lo + hi) / 2
            glo, ghi = mid - g / 2, mid + g / 2
            level.append((glo, ghi))
            nxt += [(lo, glo), (ghi, hi)]
        levels.append(tuple(level))
        intervals = nxt
    return FatCantorSet(schedule, depth, tuple(levels))


# ---------------------------------------------------------------------------
# Descent helper shared by the Cantor-Vitali map and the inverse flux
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _LevelGeometry:
    gap: tuple  # float gap length per level 1..depth
    interval: tuple  # float surviving-interval length per level 0..depth


def _geometry(S: FatCantorSet) -> _LevelGeometry:
    gap = tuple(float(S.schedule.length(n)) for n in range(1, S.depth + 1))
    interval = tuple(float(S.interval_length(n)) for n in range(0, S.depth + 1))
    return _LevelGeometry(gap, interval)


@dataclass(frozen=True)
class CantorVitaliMap:
    """w(z) = z - |S cap [0, z]|, evaluated from the depth cover.

    Values are exact at the endpoints of every depth-``depth`` interval and
    linear in between, so the map is strictly increasing, 1-Lipschitz, and
    within ``error_bound`` of the limit map.
    """

    S: FatCantorSet
    depth: int
    error_bound: Fraction
    _geo: _LevelGeometry = field(repr=False)
    _cell_mass: tuple = field(repr=False)  # measure of S inside one level-k interval

    def forward(self, z: float) -> float:
        if z <= 0:
            return float(z)
        if z >= 1:
            return float(z) - float(self.S.limit_measure)
        lo, hi = 0.0, 1.0
        removed = 0.0  # measure of S to the left of lo
        for k in range(1, self.depth + 1):
            g = self._geo.gap[k - 1]
            mid = 0.5 * (lo + hi)
            glo, ghi = mid - 0.5 * g, mid + 0.5 * g
            if z <= glo:
                hi = glo
            elif z < ghi:
                return z - removed - self._cell_mass[k]
            else:
                removed += self._cell_mass[k]
                lo = ghi
        # inside a depth-level interval: linear between exact endpoint values
        length = hi - lo
        rise = length - self._cell_mass[self.depth]
        return lo - removed + rise * (z - lo) / length

    def inverse(self, y: float) -> float:
        top = 1.0 - float(self.S.limit_measure)
        if y <= 0:
            return float(y)
        if y >= top:
            return float(y) + float(self.S.limit_measure)
        lo, hi = 0.0, 1.0
        removed = 0.0
        for k in range(1, self.depth + 1):
            g = self._geo.gap[k - 1]
            mid = 0.5 * (lo + hi)
            glo, ghi = mid - 0.5 * g, mid + 0.5 * g
            w_glo = glo - removed - self._cell_mass[k]
            w_ghi = w_glo + g
            if y <= w_glo:
                hi = glo
            elif y < w_ghi:
                return glo + (y - w_glo)
            else:
                removed += self._cell_mass[k]
                lo = ghi
        length = hi - lo
        rise = length - self._cell_mass[self.depth]
        return lo + (y - (lo - removed)) * length / rise


def make_cantor_vitali(S: FatCantorSet, depth: Optional[int] = None) -> CantorVitaliMap:
    depth = S.depth if depth is None else min(depth, S.depth)
    eps = S.residual_measure(depth) - S.limit_measure
    mass = tuple(float(S.limit_measure / 2 ** k) for k in range(depth + 1))
    return CantorVitaliMap(S, depth, eps, _geometry(S), mass)


# ---------------------------------------------------------------------------
# Inverse-Cantor flux
# ---------------------------------------------------------------------------

_SHAPE_NODES = 4097


@lru_cache(maxsize=None)
def _bump_primitive(kappa: float):
    """Cumulative integral of exp(-kappa / (1 - s^2)) on [-1, s], as a cubic Hermite table."""
    bump = lambda s: math.exp(-kappa / (1.0 - s * s)) if abs(s) < 1.0 else 0.0
    # cluster nodes towards the endpoints where the bump is flat
    theta = np.linspace(0.0, math.pi, _SHAPE_NODES)
    s = -np.cos(theta)
    values = np.zeros_like(s)
    for i in range(1, len(s)):
        values[i] = values[i - 1] + integrate_adaptive(bump, s[i - 1], s[i], 1e-16).value
    slopes = np.array([bump(x) for x in s])
    total = values[-1]
    return CubicHermiteSpline(s, values, slopes), float(total), bump


@dataclass(frozen=True)
class CantorInverseFlux:
    """Strictly increasing flux whose slope vanishes exactly on the fat Cantor cover.

    Each removed gap ``(alpha, beta)`` of length ``l`` carries the slope bump
    ``A(l) * exp(-c(l) / ((z - alpha) * (beta - z)))``; the default scaling
    uses ``A = l**2`` and ``c = l**2 / 4`` so every level stays resolvable in
    binary64, while ``bump="literal"`` uses ``A = c = 1``.
    """

    S: FatCantorSet
    depth: int
    bump: str
    _geo: _LevelGeometry = field(repr=False)
    _amp: tuple = field(repr=False)
    _kappa: tuple = field(repr=False)
    _gap_mass: tuple = field(repr=False)  # mass of a single level-k gap bump
    _subtree_mass: tuple = field(repr=False)  # mass inside one level-k interval

    def _locate(self, z: float):
        """Walk down the levels; return (level, gap_lo, gap_len, mass_left) or depth cell."""
        lo, hi = 0.0, 1.0
        left = 0.0
        for k in range(1, self.depth + 1):
            g = self._geo.gap[k - 1]
            mid = 0.5 * (lo + hi)
            glo, ghi = mid - 0.5 * g, mid + 0.5 * g
            if z <= glo:
                hi = glo
            elif z < ghi:
                return k, glo, g, left + self._subtree_mass[k]
            else:
                left += self._subtree_mass[k] + self._gap_mass[k]
                lo = ghi
        return None, lo, hi - lo, left

    def _scaled(self, k: int, glo: float, g: float, z: float) -> float:
        s = (2.0 * (z - glo) - g) / g
        return s

    def deriv(self, z: float) -> float:
        if z <= 0 or z >= 1:
            return 0.0
        k, glo, g, _ = self._locate(z)
        if k is None:
            return 0.0
        prod = (z - glo) * (glo + g - z)
        if prod <= 0:
            return 0.0
        c = self._kappa[k] * g * g / 4.0
        return self._amp[k] * math.exp(-c / prod)

    def deriv2(self, z: float) -> float:
        if z <= 0 or z >= 1:
            return 0.0
        k, glo, g, _ = self._locate(z)
        if k is None:
            return 0.0
        a, b = glo, glo + g
        prod = (z - a) * (b - z)
        if prod <= 0:
            return 0.0
        c = self._kappa[k] * g * g / 4.0
        dprod = (b - z) - (z - a)
        return self._amp[k] * math.exp(-c / prod) * c * dprod / (prod * prod)

    def eval(self, z: float) -> float:
        if z <= 0:
            return 0.0
        if z >= 1:
            return self.total
        k, glo, g, left = self._locate(z)
        if k is None:
            return left
        spline, _, _ = _bump_primitive(self._kappa[k])
        s = min(1.0, max(-1.0, self._scaled(k, glo, g, z)))
        partial = float(spline(s)) * 0.5 * g * self._amp[k]
        return left + max(partial, 0.0)

    @property
    def total(self) -> float:
        return self._subtree_mass[0]

    def inverse(self, x: float, tol: float = 0.0) -> float:
        """Smallest z in [0, 1] with f(z) >= x."""
        if x <= 0:
            return 0.0
        if x >= self.total:
            return 1.0
        lo, hi = 0.0, 1.0
        left = 0.0
        for k in range(1, self.depth + 1):
            g = self._geo.gap[k - 1]
            mid = 0.5 * (lo + hi)
            glo, ghi = mid - 0.5 * g, mid + 0.5 * g
            f_glo = left + self._subtree_mass[k]
            f_ghi = f_glo + self._gap_mass[k]
            if x <= f_glo:
                hi = glo
            elif x < f_ghi:
                target = x - f_glo
                amp, kappa = self._amp[k], self._kappa[k]
                spline, _, _ = _bump_primitive(kappa)
                scale = 0.5 * g * amp

                def resid(s: float) -> float:
                    return float(spline(s)) * scale - target

                s = find_root(resid, -1.0, 1.0, tol if tol > 0 else 1e-15)
                return glo + 0.5 * g * (s + 1.0)
            else:
                left = f_ghi
                lo = ghi
        return lo

    def inversion_tolerance(self) -> float:
        """Width of the depth cells on which f is flat (the generalized-inverse ambiguity)."""
        return self._geo.interval[self.depth]

    def as_model(self) -> FluxModel:
        return FluxModel(
            name=f"cantor_inverse[{self.bump}]",
            eval=self.eval,
            deriv=self.deriv,
            deriv2=self.deriv2,
            branches={},
            convexity_regions=((0.0, 1.0, "mixed"),),
            domain=(0.0, 1.0),
        )


def make_cantor_inverse_flux(
    S: FatCantorSet, depth: Optional[int] = None, bump: str = "scaled",
    normalize: bool = True,
) -> CantorInverseFlux:
    """Build the flux; with ``normalize`` the bump amplitudes are rescaled so that f(1) = 1."""
    depth = S.depth if depth is None else min(depth, S.depth)
    geo = _geometry(S)
    amp, kappa, gap_mass = [0.0], [0.0], [0.0]
    for k in range(1, depth + 1):
        g = geo.gap[k - 1]
        if bump == "scaled":
            a, kap = g * g, 1.0
        elif bump == "literal":
            a, kap = 1.0, 4.0 / (g * g)
        else:
            raise ValueError(f"unknown bump family {bump!r}")
        _, shape_total, _ = _bump_primitive(kap)
        amp.append(a)
        kappa.append(kap)
        gap_mass.append(a * 0.5 * g * shape_total)
    # mass of everything inside one level-k interval: gaps of levels k+1..depth below it
    subtree = [0.0] * (depth + 1)
    for k in range(depth - 1, -1, -1):
        subtree[k] = 2.0 * subtree[k + 1] + gap_mass[k + 1]
    if normalize:
        scale = 1.0 / subtree[0]
        amp = [x * scale for x in amp]
        gap_mass = [x * scale for x in gap_mass]
        subtree = [x * scale for x in subtree]
    return CantorInverseFlux(S, depth, bump, geo, tuple(amp), tuple(kappa), tuple(gap_mass), tuple(subtree))
