"""Characteristic curves of the constructed fields and the monotone families built from them."""

from __future__ import annotations

import bisect
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .field import (
    CANTOR_INVERSE,
    NON_DIFF,
    CantorInverseField,
    ConstructedField,
    CorridorFlow,
    CubicRootField,
    SolutionField,
)
from .junction import profile_for_parameter
from .numerics import ode_step_trace
from .regions import InCorridor, InCover, Outside, RegionAddress, RegionTree, as_fraction, locate

log = logging.getLogger(__name__)

EXACT_CORRIDOR = "exact-corridor"
NUMERIC_ODE = "numeric-ode"
CLOSED_FORM = "closed-form"

FORWARD = "forward"
BACKWARD = "backward"
BOTH = "both"


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------


@dataclass
class RegionSegment:
    """Piece of a characteristic inside one block of the region hierarchy."""

    t0: Fraction
    t1: Fraction
    origin: tuple  # lower-left corner of the block (exact)
    y_entry: float  # entry height relative to the block; exact for flat blocks
    flow: Optional[CorridorFlow]
    level: int
    address: RegionAddress
    kind: str
    x_flat: Optional[Fraction] = None
    _member: Optional[float] = field(default=None, repr=False)

    @property
    def provenance(self) -> str:
        return EXACT_CORRIDOR

    @property
    def cell_depth(self) -> int:
        return self.address.depth

    def member(self) -> float:
        if self._member is None:
            self._member = self.flow.member(self.y_entry)
        return self._member

    def x_exact(self, t) -> Fraction:
        if self.flow is None:
            return self.x_flat
        t_loc = float(Fraction(t) - self.origin[0])
        if t_loc <= 0.0:
            y = self.y_entry
        elif t_loc >= self.flow.width:
            y = self.flow.exit_height(self.y_entry)
        else:
            y = self.y_entry + self.flow._offset(self.member(), t_loc)
        return self.origin[1] + Fraction(y)

    def x_at(self, t) -> float:
        return float(self.x_exact(t))

    def u_at(self, t) -> float:
        if self.flow is None:
            return 0.0
        s = self.member()
        if s <= 0.0:
            return 0.0
        t_loc = min(max(float(Fraction(t) - self.origin[0]), 0.0), self.flow.width)
        return self.flow.sign * profile_for_parameter(self.flow.width, s).u(t_loc)


@dataclass
class SampledSegment:
    """Numerically integrated or closed-form piece with Hermite interpolation."""

    ts: np.ndarray
    xs: np.ndarray
    slopes: np.ndarray
    provenance: str
    u_fn: Callable[[float, float], float]
    x_fn: Optional[Callable[[float], float]] = None

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t1(self) -> float:
        return float(self.ts[-1])

    def x_at(self, t) -> float:
        t = float(t)
        if self.x_fn is not None:
            return self.x_fn(t)
        k = int(np.clip(np.searchsorted(self.ts, t) - 1, 0, len(self.ts) - 2))
        t0, t1 = self.ts[k], self.ts[k + 1]
        h = t1 - t0
        if h == 0:
            return float(self.xs[k])
        s = (t - t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return float(h00 * self.xs[k] + h10 * h * self.slopes[k]
                     + h01 * self.xs[k + 1] + h11 * h * self.slopes[k + 1])

    def x_exact(self, t):
        return self.x_at(t)

    def u_at(self, t) -> float:
        return self.u_fn(float(t), self.x_at(t))


@dataclass
class CharacteristicPath:
    segments: list
    fld: SolutionField
    ended: str = "window"
    nonunique: bool = False

    @property
    def t_start(self):
        return self.segments[0].t0 if self.segments else None

    @property
    def t_end(self):
        return self.segments[-1].t1 if self.segments else None

    @property
    def provenance(self) -> list:
        return [s.provenance for s in self.segments]

    def _segment(self, t):
        if not self.segments:
            raise ValueError("empty path")
        starts = [s.t0 for s in self.segments]
        k = max(0, bisect.bisect_right(starts, t) - 1)
        seg = self.segments[k]
        if t > seg.t1 or t < self.segments[0].t0:
            raise ValueError(f"t={t} outside the path window [{self.t_start}, {self.t_end}]")
        return seg

    def position(self, t) -> float:
        return self._segment(t).x_at(t)

    def position_exact(self, t):
        return self._segment(t).x_exact(t)

    def u_at(self, t) -> float:
        return self._segment(t).u_at(t)

    def sample_times(self, per_segment: int = 4) -> list:
        out = []
        for seg in self.segments:
            if isinstance(seg, SampledSegment):
                out.extend(float(t) for t in seg.ts)
            else:
                a, b = float(seg.t0), float(seg.t1)
                n = per_segment if seg.flow is not None else 1
                out.extend(a + (b - a) * k / n for k in range(n))
        if self.segments:
            out.append(float(self.t_end))
        return sorted(set(out))

    @property
    def samples(self) -> list:
        return [(t, self.position(t), self.u_at(t)) for t in self.sample_times()]


# ---------------------------------------------------------------------------
# Tracing
# ---------------------------------------------------------------------------


def _region_sweep(fld: ConstructedField, t: Fraction, x: Fraction, t_stop: Fraction,
                  forward: bool) -> tuple[list, str]:
    segments = []
    sense = 1 if forward else -1
    while (t < t_stop) if forward else (t > t_stop):
        loc = fld.locate(t, x, sense)
        if isinstance(loc, Outside):
            return segments, "left-domain"
        if isinstance(loc, InCover):
            cell = fld.tree.cell(loc.address)
            lo, hi = cell.t0, cell.t1
            seg_kind, level, flow, origin = "cover", loc.level, None, (cell.t0, cell.x0)
            address = loc.address
        else:
            pc = loc.piece
            lo, hi = loc.origin[0], loc.origin[0] + (pc.t1 - pc.t0)
            seg_kind, level, origin, address = pc.kind, loc.level, loc.origin, loc.address
            flow = fld.flow(loc.level, pc) if pc.role == "corridor" else None
        end = min(hi, t_stop) if forward else max(lo, t_stop)
        if flow is None:
            seg = RegionSegment(min(t, end), max(t, end), origin, float(x - origin[1]),
                                None, level, address, seg_kind, x_flat=x)
            x_next = x
        else:
            t_loc, y_loc = float(t - origin[0]), float(x - origin[1])
            if t_loc <= 0.0:
                y_entry = y_loc
            elif t_loc >= flow.width:
                y_entry = flow.entry_height(y_loc)
            else:
                s, y_entry = flow.locate_member(t_loc, y_loc)
            seg = RegionSegment(lo, hi, origin, y_entry, flow, level, address, seg_kind)
            x_next = seg.x_exact(end)
            seg.t0, seg.t1 = (t, end) if forward else (end, t)
        if seg.t1 > seg.t0:
            segments.append(seg)
        if end == t:
            raise RuntimeError(f"trace stalled at t={t}")
        t, x = end, x_next
    return segments, "window"


def _trace_region(fld: ConstructedField, start, t_span, direction: str) -> CharacteristicPath:
    t, x = Fraction(start[0]), Fraction(start[1])
    base = fld.tree.base
    lo = Fraction(t_span[0]) if t_span else base.t0
    hi = Fraction(t_span[1]) if t_span else base.t1
    if not base.contains(t, x):
        return CharacteristicPath([], fld, ended="left-domain")
    back, fwd, ended = [], [], "window"
    if direction in (BACKWARD, BOTH):
        back, e = _region_sweep(fld, t, x, max(lo, base.t0), forward=False)
        ended = e if e != "window" else ended
        back.reverse()
    if direction in (FORWARD, BOTH):
        fwd, e = _region_sweep(fld, t, x, min(hi, base.t1), forward=True)
        ended = e if e != "window" else ended
    return CharacteristicPath(back + fwd, fld, ended)


def _numeric_piece(fld: SolutionField, start, t_end: float, step_tol: float,
                   event=None) -> Optional[SampledSegment]:
    t0, x0 = float(start[0]), float(start[1])
    if t_end == t0:
        return None
    rhs = lambda t, x: fld.flux.deriv(fld.eval_u(t, x))
    tr = ode_step_trace(rhs, (t0, x0), t_end, step_tol, event, atol=step_tol * 1e-3)
    ts, xs = np.array(tr.ts), np.array(tr.xs)
    if ts[0] > ts[-1]:
        ts, xs = ts[::-1].copy(), xs[::-1].copy()
    slopes = np.array([rhs(t, x) for t, x in zip(ts, xs)])
    return SampledSegment(ts, xs, slopes, NUMERIC_ODE, fld.eval_u)


def _trace_cantor_inverse(fld: CantorInverseField, start, t_span, direction: str,
                          branch: str) -> CharacteristicPath:
    t0, x0 = float(start[0]), float(start[1])
    v0 = fld.eval_u(t0, x0)
    if branch == "shift":
        # x = f(t + tau): the state grows at unit rate
        v_of = lambda t: v0 + (t - t0)
    elif branch == "vitali":
        w0 = fld.vitali.forward(v0)
        v_of = lambda t: fld.vitali.inverse(w0 + (t - t0))
    elif branch == "vertical":
        v_of = lambda t: v0
    else:
        raise ValueError(f"unknown branch {branch!r}")
    lo, hi = (t_span if t_span else (t0 - 1.0, t0 + 1.0))
    if direction == FORWARD:
        lo = t0
    elif direction == BACKWARD:
        hi = t0
    # stay inside the state range [0, 1]
    if branch == "shift":
        lo, hi = max(lo, t0 - v0), min(hi, t0 + 1.0 - v0)
    elif branch == "vitali":
        top = 1.0 - float(fld.cantor.limit_measure)
        lo, hi = max(lo, t0 - w0), min(hi, t0 + top - w0)
    flux = fld.flux_exact
    ts = np.linspace(lo, hi, 257)
    xs = np.array([flux.eval(v_of(t)) for t in ts])
    slopes = np.array([flux.deriv(v_of(t)) for t in ts])
    seg = SampledSegment(ts, xs, slopes, CLOSED_FORM, lambda t, x: v_of(t),
                         x_fn=lambda t: flux.eval(v_of(t)))
    return CharacteristicPath([seg], fld)


def _trace_numeric(fld: SolutionField, start, t_span, direction: str,
                   step_tol: float) -> CharacteristicPath:
    t0 = float(start[0])
    lo, hi = t_span if t_span else (t0 - 1.0, t0 + 1.0)
    pieces = []
    if direction in (BACKWARD, BOTH) and lo < t0:
        pieces.append(_numeric_piece(fld, start, float(lo), step_tol))
    if direction in (FORWARD, BOTH) and hi > t0:
        pieces.append(_numeric_piece(fld, start, float(hi), step_tol))
    pieces = [p for p in pieces if p is not None]
    if len(pieces) == 2:
        b, f = pieces
        seg = SampledSegment(np.concatenate([b.ts, f.ts[1:]]), np.concatenate([b.xs, f.xs[1:]]),
                             np.concatenate([b.slopes, f.slopes[1:]]), NUMERIC_ODE, fld.eval_u)
        pieces = [seg]
    return CharacteristicPath(pieces, fld)


def trace(fld: SolutionField, start, t_span=None, direction: str = BOTH, *,
          step_tol: float = 1e-10, branch: str = "vitali",
          check_uniqueness: bool = False) -> CharacteristicPath:
    """Characteristic through ``start`` over ``t_span`` (default: the field's window).

    Region fields are followed block by block along their exact curve
    families; the cubic field is integrated numerically; the Cantor-inverse
    field uses the closed form selected by ``branch``.
    """
    if direction not in (FORWARD, BACKWARD, BOTH):
        raise ValueError(f"unknown direction {direction!r}")
    if isinstance(fld, ConstructedField):
        path = _trace_region(fld, start, t_span, direction)
    elif isinstance(fld, CantorInverseField):
        path = _trace_cantor_inverse(fld, start, t_span, direction, branch)
    else:
        path = _trace_numeric(fld, start, t_span, direction, step_tol)
    if check_uniqueness and not isinstance(fld, (ConstructedField, CantorInverseField)):
        hi = extremal_trace(fld, start, direction, "max", t_span=t_span, step_tol=step_tol)
        lo = extremal_trace(fld, start, direction, "min", t_span=t_span, step_tol=step_tol)
        spread = max(abs(hi.position(t) - lo.position(t)) for t in hi.sample_times())
        path.nonunique = spread > 1e3 * step_tol
    return path


def extremal_trace(fld: SolutionField, point, direction: str = FORWARD,
                   extremum: str = "max", *, t_span=None, step_tol: float = 1e-10,
                   width: float = 1e-30) -> CharacteristicPath:
    """Pointwise max or min over a bundle of traces started at ``x`` and ``x +/- width``."""
    if extremum not in ("max", "min"):
        raise ValueError("extremum must be 'max' or 'min'")
    if isinstance(fld, (ConstructedField, CantorInverseField)):
        return trace(fld, point, t_span, direction, step_tol=step_tol)
    t0, x0 = float(point[0]), float(point[1])
    members = []
    for off in (0.0, width, -width):
        members.append(trace(fld, (t0, x0 + off), t_span, direction, step_tol=step_tol))
    grid = sorted(set().union(*[m.sample_times() for m in members]))
    pick = max if extremum == "max" else min
    xs = np.array([pick(m.position(t) for m in members) for t in grid])
    rhs = lambda t, x: fld.flux.deriv(fld.eval_u(t, x))
    slopes = np.array([rhs(t, x) for t, x in zip(grid, xs)])
    seg = SampledSegment(np.array(grid), xs, slopes, NUMERIC_ODE, fld.eval_u)
    return CharacteristicPath([seg], fld)


# ---------------------------------------------------------------------------
# Cover intersections
# ---------------------------------------------------------------------------


def count_cover_intersections(path: CharacteristicPath, tree: RegionTree,
                              depth: int) -> tuple[int, Fraction]:
    """Distinct level-``depth`` cells met by the path and the total time spent in them."""
    cells = set()
    residence = Fraction(0)
    for seg in path.segments:
        if isinstance(seg, RegionSegment):
            if seg.cell_depth >= depth:
                cells.add(seg.address.prefix(depth))
                residence += Fraction(seg.t1) - Fraction(seg.t0)
            continue
        # sampled paths: classify sample midpoints
        ts = list(seg.ts)
        for a, b in zip(ts[:-1], ts[1:]):
            mid = 0.5 * (a + b)
            loc = locate(tree, (mid, seg.x_at(mid)), depth)
            if isinstance(loc, InCover):
                cells.add(loc.address)
                residence += Fraction(b - a)
    return len(cells), residence


# ---------------------------------------------------------------------------
# Lagrangian parameterizations
# ---------------------------------------------------------------------------


@dataclass
class LagrangianParam:
    times: np.ndarray  # sampling grid
    members: np.ndarray  # (n_members, n_times), rows ordered bottom to top
    theta_times: tuple
    theta: np.ndarray
    paths: list

    @property
    def y_domain(self) -> tuple:
        return float(self.theta[0]), float(self.theta[-1])

    def chi(self, t: float, y: float) -> float:
        """Height at time ``t`` of the parameter value ``y``, linear in ``theta`` between members."""
        col = np.array([np.interp(t, self.times, row) for row in self.members])
        y = min(max(y, self.theta[0]), self.theta[-1])
        return float(np.interp(y, self.theta, col))

    def no_crossing(self) -> bool:
        return bool(np.all(np.diff(self.members, axis=0) >= 0.0))

    def theta_increasing(self) -> bool:
        return bool(np.all(theta_gaps(self.members_at_theta_times()) > 0.0))

    def members_at_theta_times(self) -> np.ndarray:
        return np.array([[np.interp(t, self.times, row) for t in self.theta_times]
                         for row in self.members])


def theta_of(values: Sequence[float]) -> float:
    """sum_k tanh(x_k) / 2^k over the values at the recorded times."""
    return sum(math.tanh(v) / 2.0 ** (k + 1) for k, v in enumerate(values))


def theta_gaps(values: np.ndarray) -> np.ndarray:
    """theta differences of consecutive rows, summed term by term."""
    weights = 0.5 ** np.arange(1, values.shape[1] + 1)
    diffs = np.tanh(values[1:]) - np.tanh(values[:-1])
    return diffs @ weights


def build_lagrangian_param(fld: SolutionField, seeds: Sequence, window: tuple, *,
                           theta_times: Optional[Sequence[float]] = None,
                           samples: int = 33, rng_seed: Optional[int] = None,
                           **trace_opts) -> LagrangianParam:
    """Monotone family of characteristics through ``seeds``.

    Each seed's characteristic is clipped between its already accepted
    neighbours (``max(below, min(above, own))``) so that the family never
    crosses.  Members that coincide with an accepted one at every theta time
    are dropped.  ``theta_times`` defaults to the seed times.
    """
    seeds = list(seeds)
    if rng_seed is not None:
        random.Random(rng_seed).shuffle(seeds)
    lo, hi = float(window[0]), float(window[1])
    grid = np.linspace(lo, hi, samples)
    if theta_times is None:
        theta_times = sorted({min(max(float(s[0]), lo), hi) for s in seeds})
    grid = np.union1d(grid, np.array(theta_times, dtype=float))
    accepted: list = []  # (row, path)
    for seed in seeds:
        try:
            path = trace(fld, seed, (lo, hi), BOTH, **trace_opts)
            if not path.segments or float(path.t_start) > lo or float(path.t_end) < hi:
                raise ValueError("characteristic leaves the domain inside the window")
            row = np.array([path.position(t) for t in grid])
        except (ValueError, RuntimeError) as exc:
            log.warning("skipping seed %s: %s", seed, exc)
            continue
        ts, xs = float(seed[0]), float(seed[1])
        below = [r for r, _ in accepted if np.interp(ts, grid, r) <= xs]
        above = [r for r, _ in accepted if np.interp(ts, grid, r) > xs]
        if below:
            row = np.maximum(row, max(below, key=lambda r: np.interp(ts, grid, r)))
        if above:
            row = np.minimum(row, min(above, key=lambda r: np.interp(ts, grid, r)))
        at_theta = np.array([np.interp(t, grid, row) for t in theta_times])
        if any(np.array_equal(at_theta, [np.interp(t, grid, r) for t in theta_times])
               for r, _ in accepted):
            continue
        accepted.append((row, path))
    if not accepted:
        raise ValueError("no seed produced a usable characteristic")
    at_theta = np.array([[np.interp(t, grid, r) for t in theta_times] for r, _ in accepted])
    # order by the family order: lexicographic on the theta-time values
    order = sorted(range(len(accepted)), key=lambda k: tuple(at_theta[k]))
    members = np.array([accepted[k][0] for k in order])
    theta = np.array([theta_of(at_theta[k]) for k in order])
    return LagrangianParam(grid, members, tuple(theta_times), theta,
                           [accepted[k][1] for k in order])


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------


def diff_quotient_probe(fld: SolutionField, path: CharacteristicPath, t_star,
                        probe_times: Sequence) -> list:
    """``(u(path(t)) - u(path(t_star))) / (t - t_star)`` for each probe time."""
    u_star = path.u_at(t_star)
    out = []
    for t in probe_times:
        dt = Fraction(t) - Fraction(t_star)
        out.append((path.u_at(t) - u_star) / float(dt))
    return out


def lipschitz_probe(path: CharacteristicPath, scales: Sequence[float],
                    anchors: Optional[Sequence[float]] = None, points: int = 64) -> list:
    """Largest ``|u(path(t + h)) - u(path(t))| / h`` per scale ``h``.

    ``anchors`` are the base times ``t``; by default a uniform grid over
    the path window.
    """
    lo, hi = float(path.t_start), float(path.t_end)
    out = []
    for h in scales:
        base = anchors if anchors is not None else np.linspace(lo, hi - h, points)
        best = 0.0
        for t in base:
            if t < lo or t + h > hi:
                continue
            best = max(best, abs(path.u_at(t + h) - path.u_at(t)) / h)
        out.append(best)
    return out


def interval_images(fld: CantorInverseField, level: int) -> list:
    """Images under w of the left endpoints of the level-``level`` construction intervals."""
    S = fld.cantor
    lefts = [Fraction(0)]
    for k in range(1, level + 1):
        new = []
        length = S.interval_length(k - 1)
        for left in lefts:
            gap = S.schedule.length(k)
            new += [left, left + (length + gap) / 2]
        lefts = new
    return [fld.vitali.forward(float(x)) for x in lefts]


# ---------------------------------------------------------------------------
# The steep corner of the convex-flat construction
# ---------------------------------------------------------------------------


def cover_corner(fld: ConstructedField) -> tuple:
    """Bottom-right corner of the deepest all-(j=0, h=1) cell."""
    levels = fld.tree.levels
    x = sum((lv.delta for lv in levels[1:]), Fraction(0))
    return as_fraction(levels[0].a), x


def corner_ladders(fld: ConstructedField, levels: Optional[int] = None) -> dict:
    """Times where the corner characteristic has ``u = 0`` and where it is steepest."""
    n = fld.depth if levels is None else min(levels, fld.depth)
    a0 = as_fraction(fld.tree.levels[0].a)
    zero, steep = {}, {}
    for i in range(1, n + 1):
        p = fld.tree.levels[i]
        a, b = as_fraction(p.a), as_fraction(p.b)
        zero[i] = a0 - a
        steep[i] = a0 - b - 3 * a / 2
    return {"zero": zero, "steep": steep}


def steep_filler_points(fld: ConstructedField, levels: Optional[int] = None):
    """``(level, point on the corner path, bottom of its filler block)`` per level."""
    if fld.scenario != NON_DIFF:
        raise ValueError("defined for the convex-flat construction only")
    path = trace(fld, cover_corner(fld), direction=BACKWARD)
    out = []
    for i, t in corner_ladders(fld, levels)["steep"].items():
        x = path.position_exact(t)
        loc = fld.locate(t, x)
        if not isinstance(loc, InCorridor) or loc.piece.kind != "L" or loc.level != i:
            raise RuntimeError(f"corner path is not in the level-{i} filler block at t={t}")
        out.append((i, (t, x), (t, loc.origin[1])))
    return out
