"""Nested rectangle hierarchies carrying the two counterexample constructions.

Coordinates are ``(t, x)``.  The base cell ``Q0 = [0, a0] x [0, c0]`` is cut
into ``d`` horizontal strips; each strip holds two cells of the next level
(top-left and bottom-right), a junction corridor ``R`` between them, and two
filler regions ``L`` and ``-L``.  All geometry is exact (``Fraction``); the
``"five"`` construction has non-dyadic strip heights, so its dyadic level
parameters are converted to fractions for the geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Optional, Union

from .numerics import DyadicScalar

FOUR = "four"
FIVE = "five"
VARIANTS = (FOUR, FIVE)

Exact = Union[Fraction, DyadicScalar]


class MaterializationBudgetError(RuntimeError):
    pass


def as_fraction(value) -> Fraction:
    if isinstance(value, DyadicScalar):
        return value.to_fraction()
    return Fraction(value)


# ---------------------------------------------------------------------------
# Level parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelParams:
    variant: str
    i: int
    a: Exact
    b: Optional[Exact]
    c: Exact
    d: Optional[int]
    e: Optional[Fraction] = None  # filler ratio (variant "four")
    lam: Optional[int] = None  # c_{i-1} / c_i (variant "five")

    @property
    def delta(self) -> Fraction:
        """Filler band height ``c / (4 d)`` of the "five" construction."""
        if self.variant != FIVE or self.d is None:
            raise AttributeError("delta is defined for variant 'five' at levels >= 1")
        return as_fraction(self.c) / (4 * self.d)

    @property
    def strip_height(self) -> Fraction:
        c = as_fraction(self.c)
        if self.variant == FOUR:
            return c * (1 + self.e)
        return c + 4 * self.delta


def _four_c(i: int) -> Fraction:
    prod = Fraction(1)
    for j in range(1, i + 1):
        prod *= 1 + Fraction(1, 2 ** j)
    return Fraction(1, 2 ** (4 * i + 1)) / prod


def level_params(variant: str, i: int) -> LevelParams:
    """Exact parameters of level ``i`` (level 0 is the base cell)."""
    if i < 0:
        raise ValueError("level must be nonnegative")
    if variant == FOUR:
        if i == 0:
            return LevelParams(FOUR, 0, Fraction(1), None, Fraction(1, 2), None)
        a = Fraction(1, 2 ** (i + 1)) * (1 + Fraction(1, 2 ** i))
        return LevelParams(FOUR, i, a, Fraction(1, 4 ** i), _four_c(i), 16, Fraction(1, 2 ** i))
    if variant == FIVE:
        if i == 0:
            return LevelParams(FIVE, 0, DyadicScalar.pow2(0), None, DyadicScalar.pow2(-2), None)
        a = DyadicScalar.pow2(-i - 1) + DyadicScalar.pow2(-2 * i - 1)
        lam = 2 ** (3 * 2 ** (2 * i - 1))
        return LevelParams(FIVE, i, a, DyadicScalar.pow2(-2 * i),
                           DyadicScalar.pow2(-(2 ** (2 * i + 1))), lam - 1, None, lam)
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Addresses and pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionAddress:
    js: tuple = ()
    hs: tuple = ()

    def __post_init__(self) -> None:
        if len(self.js) != len(self.hs):
            raise ValueError("js and hs must have equal length")
        if any(h not in (0, 1) for h in self.hs):
            raise ValueError("hs entries must be 0 or 1")

    @property
    def depth(self) -> int:
        return len(self.js)

    def child(self, j: int, h: int) -> "RegionAddress":
        return RegionAddress(self.js + (j,), self.hs + (h,))

    def prefix(self, n: int) -> "RegionAddress":
        return RegionAddress(self.js[:n], self.hs[:n])


@dataclass(frozen=True)
class Piece:
    """Axis-aligned block of a strip, in strip-local coordinates.

    ``role`` is ``"cell"`` for next-level cells, ``"flat"`` where ``u = 0``
    and characteristics are horizontal, ``"corridor"`` where they follow
    junction curves.
    """

    kind: str  # "L", "-L", "R" or "Q"
    role: str
    t0: Fraction
    t1: Fraction
    x0: Fraction
    x1: Fraction
    h: Optional[int] = None

    def contains(self, t: Fraction, x: Fraction) -> bool:
        return self.t0 <= t <= self.t1 and self.x0 <= x <= self.x1


def strip_pieces(p: LevelParams, prev: LevelParams) -> tuple:
    a, b, c = as_fraction(p.a), as_fraction(p.b), as_fraction(p.c)
    a_prev = as_fraction(prev.a)
    right = a + b
    if p.variant == FOUR:
        low = c * p.e
        top = c * (1 + p.e)
        return (
            Piece("L", "flat", Fraction(0), a, Fraction(0), low),
            Piece("Q", "cell", Fraction(0), a, low, top, h=0),
            Piece("R", "corridor", a, right, Fraction(0), top),
            Piece("Q", "cell", right, a_prev, Fraction(0), c, h=1),
            Piece("-L", "flat", right, a_prev, c, top),
        )
    dl = p.delta
    return (
        Piece("L", "corridor", Fraction(0), a, Fraction(0), 3 * dl),
        Piece("L", "flat", a, a_prev, Fraction(0), dl),
        Piece("Q", "cell", Fraction(0), a, 3 * dl, 3 * dl + c, h=0),
        Piece("R", "corridor", a, right, dl, c + 3 * dl),
        Piece("Q", "cell", right, a_prev, dl, dl + c, h=1),
        Piece("-L", "corridor", right, a_prev, c + dl, c + 4 * dl),
        Piece("-L", "flat", Fraction(0), right, c + 3 * dl, c + 4 * dl),
    )


# ---------------------------------------------------------------------------
# Location results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Outside:
    kind: str = "outside"


@dataclass(frozen=True)
class InCorridor:
    piece: Piece
    level: int
    address: RegionAddress  # cells entered, then the strip index with h = -1 removed
    strip: int
    origin: tuple  # absolute lower-left corner of the piece
    local: tuple  # point minus origin
    kind: str = "corridor"


@dataclass(frozen=True)
class InCover:
    level: int
    address: RegionAddress
    origin: tuple
    local: tuple
    kind: str = "cover"


Location = Union[Outside, InCorridor, InCover]


# ---------------------------------------------------------------------------
# Tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rectangle:
    address: RegionAddress
    t0: Fraction
    t1: Fraction
    x0: Fraction
    x1: Fraction

    @property
    def area(self) -> Fraction:
        return (self.t1 - self.t0) * (self.x1 - self.x0)

    def contains(self, t, x) -> bool:
        return self.t0 <= t <= self.t1 and self.x0 <= x <= self.x1


@dataclass(frozen=True)
class RegionTree:
    variant: str
    depth: int
    levels: tuple = field(repr=False)

    @cached_property
    def pieces(self) -> tuple:
        out = [()]
        for i in range(1, self.depth + 1):
            out.append(strip_pieces(self.levels[i], self.levels[i - 1]))
        return tuple(out)

    @cached_property
    def strip_heights(self) -> tuple:
        return (None,) + tuple(self.levels[i].strip_height for i in range(1, self.depth + 1))

    @property
    def base(self) -> Rectangle:
        p = self.levels[0]
        return Rectangle(RegionAddress(), Fraction(0), as_fraction(p.a), Fraction(0), as_fraction(p.c))

    def translation_vectors(self, i: int) -> dict:
        """Offsets of the strip and of the pieces of level ``i``, keyed by name.

        ``v`` stacks strips, ``r``/``u`` place the top-left/bottom-right
        cells, ``q`` the corridor and ``s`` the point reflection of ``L``
        onto ``-L``.
        """
        p, prev = self.levels[i], self.levels[i - 1]
        a, b, c = as_fraction(p.a), as_fraction(p.b), as_fraction(p.c)
        H = self.strip_heights[i]
        cells = {pc.h: pc for pc in self.pieces[i] if pc.role == "cell"}
        corridor = next(pc for pc in self.pieces[i] if pc.kind == "R")
        return {
            "v": (Fraction(0), H),
            "q": (Fraction(0), corridor.x0),
            "r": (cells[0].t0, cells[0].x0),
            "u": (cells[1].t0, cells[1].x0),
            "s": (as_fraction(prev.a), H),
        }

    def cell_origin(self, address: RegionAddress) -> tuple:
        t, x = Fraction(0), Fraction(0)
        for level, (j, h) in enumerate(zip(address.js, address.hs), start=1):
            cell = next(pc for pc in self.pieces[level] if pc.role == "cell" and pc.h == h)
            if not 0 <= j < self.levels[level].d:
                raise ValueError(f"strip index {j} out of range at level {level}")
            t += cell.t0
            x += j * self.strip_heights[level] + cell.x0
        return t, x

    def cell(self, address: RegionAddress) -> Rectangle:
        t, x = self.cell_origin(address)
        p = self.levels[address.depth]
        return Rectangle(address, t, t + as_fraction(p.a), x, x + as_fraction(p.c))


def build_tree(variant: str, depth: int) -> RegionTree:
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    return RegionTree(variant, depth, tuple(level_params(variant, i) for i in range(depth + 1)))


# ---------------------------------------------------------------------------
# Enumeration and measure
# ---------------------------------------------------------------------------


def count_rectangles(tree: RegionTree, i: int) -> int:
    n = 2 ** i
    for level in range(1, i + 1):
        n *= tree.levels[level].d
    return n


def rectangles_at_depth(tree: RegionTree, i: int) -> Iterator[Rectangle]:
    """Lazily enumerate the ``2^i d_1 ... d_i`` level-``i`` cells in address order."""
    if i > tree.depth:
        raise ValueError(f"level {i} exceeds tree depth {tree.depth}")
    a, c = as_fraction(tree.levels[i].a), as_fraction(tree.levels[i].c)

    def walk(level: int, t: Fraction, x: Fraction, address: RegionAddress):
        if level > i:
            yield Rectangle(address, t, t + a, x, x + c)
            return
        H = tree.strip_heights[level]
        cells = [pc for pc in tree.pieces[level] if pc.role == "cell"]
        cells.sort(key=lambda pc: pc.h)
        for j in range(tree.levels[level].d):
            for pc in cells:
                yield from walk(level + 1, t + pc.t0, x + j * H + pc.x0, address.child(j, pc.h))

    yield from walk(1, Fraction(0), Fraction(0), RegionAddress())


def materialize_rectangles(tree: RegionTree, i: int, budget: int = 1_000_000) -> list:
    n = count_rectangles(tree, i)
    if n > budget:
        raise MaterializationBudgetError(f"{n} rectangles at level {i} exceed budget {budget}")
    return list(rectangles_at_depth(tree, i))


def covered_measure(tree: RegionTree, i: int) -> Fraction:
    """Exact area of the level-``i`` cover: count times cell area."""
    p = tree.levels[i]
    return count_rectangles(tree, i) * as_fraction(p.a) * as_fraction(p.c)


def closed_form_measure(variant: str, i: int) -> Fraction:
    """The same area from the product formula, used as an independent identity."""
    p0, p = level_params(variant, 0), level_params(variant, i)
    out = 2 ** i * as_fraction(p.a) * as_fraction(p0.c)
    for j in range(1, i + 1):
        pj = level_params(variant, j)
        if variant == FOUR:
            out /= 1 + pj.e
        else:
            out *= 1 - Fraction(1, pj.lam)
    return out


def corridor_measure(tree: RegionTree, i: int) -> Fraction:
    """Area of the non-cell pieces added at level ``i`` inside all level ``i-1`` cells."""
    parents = count_rectangles(tree, i - 1)
    per_strip = sum(
        (pc.t1 - pc.t0) * (pc.x1 - pc.x0) for pc in tree.pieces[i] if pc.role != "cell"
    )
    return parents * tree.levels[i].d * per_strip


@dataclass(frozen=True)
class LimitEstimate:
    estimate: float
    lower: float
    upper: float


def limit_measure(variant: str, terms: int = 12) -> LimitEstimate:
    """Area of the infinite intersection with a certified enclosure.

    ``terms`` factors of the infinite product are taken exactly; the tail
    is enclosed with ``exp(-sum x) <= prod (1 - x)`` / ``prod (1 + x) <= exp(sum x)``.
    """
    if variant == FOUR:
        head = Fraction(1)
        for j in range(1, terms + 1):
            head *= 1 + Fraction(1, 2 ** j)
        tail_sum = 2.0 ** -terms  # sum over j > terms of 2^-j
        upper = float(Fraction(1, 4) / head)
        lower = upper * math.exp(-tail_sum)
        return LimitEstimate(0.5 * (upper + lower), lower, upper)
    if variant == FIVE:
        # 1/lam_j = 2^(-3 * 2^(2j-1)) decays doubly exponentially, so three
        # exact factors suffice; the tail is bounded by twice its first term
        terms = min(terms, 3)
        head = Fraction(1, 8)
        for j in range(1, terms + 1):
            head *= 1 - Fraction(1, level_params(FIVE, j).lam)
        tail_exp = -3 * 2 ** (2 * terms + 1)
        tail_sum = 2.0 * 2.0 ** tail_exp if tail_exp > -1074 else 2.0 ** -1074
        upper = float(head)
        return LimitEstimate(upper, upper * (1.0 - tail_sum), upper)
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Point location
# ---------------------------------------------------------------------------


def _pick_piece(pieces, t: Fraction, x: Fraction, t_end: Fraction, x_end: Fraction,
                direction: int) -> Optional[Piece]:
    """Choose the piece owning ``(t, x)``; boundary ties follow ``direction`` in time."""
    best = None
    for pc in pieces:
        if not pc.contains(t, x):
            continue
        if direction >= 0 and t == pc.t1 and t != t_end:
            continue
        if direction < 0 and t == pc.t0 and t != 0:
            continue
        if x == pc.x1 and x != x_end:
            # on a shared horizontal edge prefer the piece above
            best = best or pc
            continue
        return pc
    return best


def locate(tree: RegionTree, point, max_depth: Optional[int] = None,
           direction: int = 1) -> Location:
    """Classify ``point`` as outside, in a corridor or filler, or in the deepest cover.

    ``direction`` breaks ties on vertical piece boundaries: ``+1`` assigns a
    boundary point to the piece on its right (forward tracing), ``-1`` to
    the piece on its left.
    """
    depth = tree.depth if max_depth is None else min(max_depth, tree.depth)
    t, x = Fraction(point[0]), Fraction(point[1])
    base = tree.base
    if not base.contains(t, x):
        return Outside()
    ot, ox = Fraction(0), Fraction(0)
    address = RegionAddress()
    for level in range(1, depth + 1):
        p = tree.levels[level]
        lt, lx = t - ot, x - ox
        H = tree.strip_heights[level]
        j = min(int(lx // H), p.d - 1)
        y = lx - j * H
        a_prev = as_fraction(tree.levels[level - 1].a)
        top = H if j == p.d - 1 else H
        pc = _pick_piece(tree.pieces[level], lt, y, a_prev, top, direction)
        if pc is None and y == H and j + 1 < p.d:
            j, y = j + 1, Fraction(0)
            pc = _pick_piece(tree.pieces[level], lt, y, a_prev, top, direction)
        if pc is None:
            raise RuntimeError(f"no piece owns local point ({lt}, {y}) at level {level}")
        if pc.role == "cell":
            ot += pc.t0
            ox += j * H + pc.x0
            address = address.child(j, pc.h)
            continue
        origin = (ot + pc.t0, ox + j * H + pc.x0)
        return InCorridor(pc, level, address, j, origin, (t - origin[0], x - origin[1]))
    return InCover(depth, address, (ot, ox), (t - ot, x - ox))
