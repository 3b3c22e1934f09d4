"""Evaluable solution fields for the four scenarios.

The two region-based fields (``cantor-param`` on the quadratic flux and
``nondiff`` on the convex-flat flux) assign ``u`` corridor by corridor: a
corridor is split into bands of entry heights, each band mapping its entry
height linearly onto a displacement realized by a junction curve.  Inside a
corridor ``u`` at ``(t, x)`` is the state of the unique member of the curve
family passing through that point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .flux import (
    CantorInverseFlux,
    FatCantorSet,
    FluxModel,
    make_cantor_inverse_flux,
    make_cantor_vitali,
    make_convex_flat,
    make_cubic,
    make_fat_cantor,
    make_quadratic,
)
from .junction import (
    DECREASING,
    INCREASING,
    JunctionFamily,
    Profile,
    profile_for_parameter,
)
from .numerics import find_root
from .regions import (
    FIVE,
    FOUR,
    InCorridor,
    InCover,
    Outside,
    Piece,
    RegionTree,
    as_fraction,
    build_tree,
    locate,
)

CANTOR_PARAM = "cantor-param"
NON_DIFF = "nondiff"
CANTOR_INVERSE = "notlip"
CUBIC_ROOT = "cubic"
SCENARIOS = (CANTOR_PARAM, NON_DIFF, CANTOR_INVERSE, CUBIC_ROOT)

EULERIAN = "eulerian"
BROAD = "broad"

# deepest level of the convex-flat construction evaluated in binary64
FLOAT_LEVELS = 4


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Undefined"

    def __bool__(self) -> bool:
        return False


UNDEFINED = _Undefined()


class FieldConsistencyError(RuntimeError):
    """A corridor point could not be matched to a member of its curve family."""


# ---------------------------------------------------------------------------
# Corridor flows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Band:
    """Entry heights ``[lo, hi]`` whose displacement magnitude is linear in the height.

    ``zero_at`` names the end where the displacement vanishes (``None`` for
    a constant band); ``s_end`` is the family parameter of the largest
    member used by the band.
    """

    lo: float
    hi: float
    zero_at: Optional[str]
    s_end: float

    def weight(self, y: float) -> float:
        if self.zero_at is None:
            return 1.0
        span = self.hi - self.lo
        w = (y - self.lo) / span if self.zero_at == "lo" else (self.hi - y) / span
        return min(1.0, max(0.0, w))


@dataclass
class CorridorFlow:
    family: JunctionFamily
    bands: tuple

    @property
    def width(self) -> float:
        return self.family.b

    @property
    def sign(self) -> float:
        return 1.0 if self.family.orientation == INCREASING else -1.0

    def _band_of(self, y: float) -> Band:
        for band in self.bands:
            if y <= band.hi:
                return band
        return self.bands[-1]

    def _log_max(self, band: Band) -> float:
        return self.family.log_displacement(band.s_end)

    def displacement(self, y: float) -> float:
        """Signed displacement of the member entering at height ``y``."""
        band = self._band_of(y)
        w = band.weight(y)
        if w <= 0.0:
            return 0.0
        return self.sign * math.exp(self._log_max(band) + math.log(w))

    def exit_height(self, y: float) -> float:
        return y + self.displacement(y)

    def entry_height(self, y_exit: float) -> float:
        """Inverse of :meth:`exit_height`, linear on each band."""
        for band in self.bands:
            e_lo, e_hi = self.exit_height(band.lo), self.exit_height(band.hi)
            if y_exit <= e_hi or band is self.bands[-1]:
                if e_hi == e_lo:
                    return band.lo
                frac = (y_exit - e_lo) / (e_hi - e_lo)
                return band.lo + min(1.0, max(0.0, frac)) * (band.hi - band.lo)
        raise AssertionError("unreachable")

    def _parameter_of_weight(self, band: Band, w: float) -> float:
        if w <= 0.0:
            return 0.0
        if band.zero_at is None or w >= 1.0:
            return band.s_end
        return self.family.parameter_for(self._log_max(band) + math.log(w))

    def member(self, y_entry: float) -> float:
        """Family parameter of the member entering at ``y_entry``."""
        band = self._band_of(y_entry)
        return self._parameter_of_weight(band, band.weight(y_entry))

    def _entry_of_parameter(self, band: Band, s: float) -> float:
        if band.zero_at is None:
            raise ValueError("constant band has a single member")
        w = math.exp(self.family.log_displacement(s) - self._log_max(band)) if s > 0 else 0.0
        w = min(1.0, w)
        span = band.hi - band.lo
        return band.lo + w * span if band.zero_at == "lo" else band.hi - w * span

    def _offset(self, s: float, t: float) -> float:
        if s <= 0.0:
            return 0.0
        lo = self.family.log_partial(s, t)
        return self.sign * math.exp(lo) if lo > -math.inf else 0.0

    def locate_member(self, t: float, y: float) -> tuple[float, float]:
        """``(s, y_entry)`` of the member passing through local ``(t, y)``."""
        t = min(max(t, 0.0), self.width)
        if t == 0.0:
            return self.member(y), y
        for band in self.bands:
            if band.zero_at is None:
                y0 = y - self._offset(band.s_end, t)
                if band.lo <= y0 <= band.hi:
                    return band.s_end, y0
                continue
            pos = lambda s: self._entry_of_parameter(band, s) + self._offset(s, t) - y
            p0, p1 = pos(0.0), pos(band.s_end)
            if p0 == 0.0:
                return 0.0, self._entry_of_parameter(band, 0.0)
            if p1 == 0.0:
                return band.s_end, self._entry_of_parameter(band, band.s_end)
            if (p0 < 0) != (p1 < 0):
                s = find_root(pos, 0.0, band.s_end, 1e-15)
                return s, self._entry_of_parameter(band, s)
        # rounding at a band edge: fall back to the nearest member
        ends = [(abs(self.exit_height(b.lo) - y), b.lo) for b in self.bands]
        ends += [(abs(self.exit_height(b.hi) - y), b.hi) for b in self.bands]
        _, y0 = min(ends)
        if min(ends)[0] > 1e-9 * max(1e-300, self.bands[-1].hi):
            raise FieldConsistencyError(f"no member through local point ({t}, {y})")
        return self.member(y0), y0

    def state(self, t: float, y: float) -> tuple[float, float]:
        """``(u, du/dt)`` at local ``(t, y)``."""
        s, _ = self.locate_member(t, y)
        if s <= 0.0:
            return 0.0, 0.0
        prof = profile_for_parameter(self.width, s)
        return self.sign * prof.u(t), self.sign * prof.udot(t)

    def position(self, y_entry: float, t: float) -> float:
        """Height at local time ``t`` of the member entering at ``y_entry``."""
        return y_entry + self._offset(self.member(y_entry), t)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass
class LevelOffset:
    """The filler offset of the convex-flat construction, kept in log form."""

    level: int
    delta: Fraction
    log_excess: float  # log |gamma(a) - gamma(0)| of the steepest filler curve

    @property
    def log2_excess(self) -> float:
        return self.log_excess / math.log(2.0)

    @property
    def below_half_band(self) -> bool:
        """The offset stays inside ``(delta, 2 delta)``."""
        return self.log_excess < math.log(float(self.delta)) if self.delta > 0 else False


class SolutionField:
    scenario: str
    flux: FluxModel

    def eval_u(self, t, x) -> float:
        raise NotImplementedError

    def eval_g(self, t, x, notion: str = EULERIAN):
        raise NotImplementedError

    def contains(self, t, x) -> bool:
        return True


@dataclass
class ConstructedField(SolutionField):
    """Region-based field of the quadratic or convex-flat construction."""

    scenario: str
    flux: FluxModel
    tree: RegionTree
    depth: int  # levels with assigned corridors; deeper cells are treated as u = 0
    offsets: dict = field(default_factory=dict)
    _flows: dict = field(default_factory=dict, repr=False)

    def contains(self, t, x) -> bool:
        return self.tree.base.contains(Fraction(t), Fraction(x))

    def locate(self, t, x, direction: int = 1):
        return locate(self.tree, (t, x), self.depth, direction)

    def flow(self, level: int, piece: Piece) -> CorridorFlow:
        key = (level, piece.kind)
        if key not in self._flows:
            self._flows[key] = self._make_flow(level, piece.kind)
        return self._flows[key]

    def _make_flow(self, level: int, kind: str) -> CorridorFlow:
        p = self.tree.levels[level]
        a, b, c = float(as_fraction(p.a)), float(as_fraction(p.b)), float(as_fraction(p.c))
        if self.tree.variant == FOUR:
            if kind != "R":
                raise ValueError(f"no corridor of kind {kind!r} in this construction")
            e = float(p.e)
            fam = JunctionFamily(self.flux, b, INCREASING)
            s_end = fam.parameter_for(math.log(c * (1.0 - e)))
            return CorridorFlow(fam, (
                Band(0.0, c * e, "lo", s_end),
                Band(c * e, c * (1.0 + e), "hi", s_end),
            ))
        delta = float(p.delta)
        if kind == "R":
            fam = JunctionFamily(self.flux, b, INCREASING)
            log_target = math.log(c) + math.log1p(-1.0 / (4.0 * p.d))
            s_end = fam.parameter_for(log_target)
            return CorridorFlow(fam, (
                Band(0.0, delta, "lo", s_end),
                Band(delta, 2.0 * delta, None, s_end),
                Band(2.0 * delta, c + 2.0 * delta, "hi", s_end),
            ))
        fam = JunctionFamily(self.flux, a, DECREASING)
        s_mid = 1.5  # big-case member with tau = a / 8
        excess = self.offsets[level].log_excess
        e = delta + math.exp(excess) if excess > -745 else delta
        if kind == "L":
            return CorridorFlow(fam, (
                Band(0.0, e, "lo", s_mid),
                Band(e, e + delta, None, s_mid),
                Band(e + delta, 3.0 * delta, "hi", s_mid),
            ))
        return CorridorFlow(fam, (
            Band(0.0, delta, "lo", s_mid),
            Band(delta, 2.0 * delta, None, s_mid),
            Band(2.0 * delta, 3.0 * delta, "hi", s_mid),
        ))

    def _state(self, t, x) -> tuple:
        loc = self.locate(t, x)
        if isinstance(loc, Outside):
            raise ValueError(f"point ({t}, {x}) lies outside the base cell")
        if isinstance(loc, InCover):
            return 0.0, 0.0, loc
        if loc.piece.role == "flat":
            return 0.0, 0.0, loc
        flow = self.flow(loc.level, loc.piece)
        u, udot = flow.state(float(loc.local[0]), float(loc.local[1]))
        return u, udot, loc

    def eval_u(self, t, x) -> float:
        return self._state(t, x)[0]

    def eval_g(self, t, x, notion: str = EULERIAN):
        _, udot, loc = self._state(t, x)
        if notion == BROAD and isinstance(loc, InCover):
            return UNDEFINED
        if notion not in (EULERIAN, BROAD):
            raise ValueError(f"unknown source notion {notion!r}")
        return udot


@dataclass
class CantorInverseField(SolutionField):
    """``u(t, x) = f^{-1}(x)`` for the flux that is flat on a fat Cantor set."""

    flux_exact: CantorInverseFlux
    cantor: FatCantorSet
    scenario: str = CANTOR_INVERSE

    def __post_init__(self) -> None:
        self.flux = self.flux_exact.as_model()
        self.vitali = make_cantor_vitali(self.cantor, self.flux_exact.depth)
        self._inverse = lru_cache(maxsize=1 << 18)(self.flux_exact.inverse)

    @property
    def inversion_tolerance(self) -> float:
        return self.flux_exact.inversion_tolerance()

    def contains(self, t, x) -> bool:
        return 0.0 <= float(x) <= self.flux_exact.total

    def eval_u(self, t, x) -> float:
        x = float(x)
        if not self.contains(t, x):
            raise ValueError(f"x={x} outside [f(0), f(1)]")
        return self._inverse(x)

    def eval_g(self, t, x, notion: str = EULERIAN):
        if notion == EULERIAN:
            return 1.0
        if notion == BROAD:
            return UNDEFINED
        raise ValueError(f"unknown source notion {notion!r}")


@dataclass
class CubicRootField(SolutionField):
    """``u = cbrt(x)`` for the cubic flux: ``f(u) = x`` exactly."""

    scenario: str = CUBIC_ROOT

    def __post_init__(self) -> None:
        self.flux = make_cubic()

    def eval_u(self, t, x) -> float:
        return float(np.cbrt(float(x)))

    def eval_g(self, t, x, notion: str = EULERIAN):
        if notion == EULERIAN:
            return 1.0
        if notion == BROAD:
            return 0.0 if float(x) == 0.0 else 1.0
        raise ValueError(f"unknown source notion {notion!r}")


def filler_offsets(flux: FluxModel, tree: RegionTree, levels: int) -> dict:
    """Log displacement of the steepest filler curve at each float-evaluated level."""
    out = {}
    for i in range(1, levels + 1):
        p = tree.levels[i]
        a = float(as_fraction(p.a))
        fam = JunctionFamily(flux, a, DECREASING)
        out[i] = LevelOffset(i, p.delta, fam.log_displacement(1.5))
    return out


def build_field(scenario: str, depth: int = 3, *, cantor_depth: int = 12,
                bump: str = "scaled") -> SolutionField:
    if scenario == CANTOR_PARAM:
        tree = build_tree(FOUR, depth)
        return ConstructedField(CANTOR_PARAM, make_quadratic(), tree, depth)
    if scenario == NON_DIFF:
        tree = build_tree(FIVE, depth)
        levels = min(depth, FLOAT_LEVELS)
        flux = make_convex_flat()
        return ConstructedField(NON_DIFF, flux, tree, levels, filler_offsets(flux, tree, levels))
    if scenario == CANTOR_INVERSE:
        S = make_fat_cantor(depth=cantor_depth)
        return CantorInverseField(make_cantor_inverse_flux(S, bump=bump), S)
    if scenario == CUBIC_ROOT:
        return CubicRootField()
    raise ValueError(f"unknown scenario {scenario!r}")


# ---------------------------------------------------------------------------
# Continuity report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    t0: float
    t1: float
    x0: float
    x1: float
    nt: int = 9
    nx: int = 9


@dataclass(frozen=True)
class AdversarialPair:
    level: int
    du: float
    log_dx: float  # natural log of the height gap, exact up to the final logarithm

    def log_ratio(self, alpha: float) -> float:
        return math.log(self.du) - alpha * self.log_dx

    def ratio(self, alpha: float) -> float:
        lr = self.log_ratio(alpha)
        return math.exp(lr) if lr < 709 else math.inf


@dataclass
class ContinuityReport:
    samples: list  # (|dt|, |dx|, |du|) between grid neighbours
    adversarial: list

    def max_jump(self) -> float:
        return max((s[2] for s in self.samples), default=0.0)


def log_of(q: Fraction) -> float:
    q = Fraction(q)
    return math.log(q.numerator) - math.log(q.denominator)


def continuity_report(fld: SolutionField, grid: Optional[GridSpec] = None,
                      levels: Optional[int] = None) -> ContinuityReport:
    """Neighbour differences on a grid plus, for ``nondiff``, the steep filler pairs."""
    samples = []
    if grid is not None:
        ts = [grid.t0 + (grid.t1 - grid.t0) * k / max(1, grid.nt - 1) for k in range(grid.nt)]
        xs = [grid.x0 + (grid.x1 - grid.x0) * k / max(1, grid.nx - 1) for k in range(grid.nx)]
        values = [[fld.eval_u(t, x) for x in xs] for t in ts]
        for a in range(grid.nt):
            for b in range(grid.nx):
                if a + 1 < grid.nt:
                    samples.append((ts[a + 1] - ts[a], 0.0, abs(values[a + 1][b] - values[a][b])))
                if b + 1 < grid.nx:
                    samples.append((0.0, xs[b + 1] - xs[b], abs(values[a][b + 1] - values[a][b])))
    adversarial = []
    if getattr(fld, "scenario", None) == NON_DIFF:
        from .characteristics import steep_filler_points

        for lvl, point, anchor in steep_filler_points(fld, levels):
            du = abs(fld.eval_u(*point) - fld.eval_u(*anchor))
            adversarial.append(AdversarialPair(lvl, du, log_of(point[1] - anchor[1])))
    return ContinuityReport(samples, adversarial)
