"""Numeric kernels shared by the rest of the package.

Adaptive Gauss-Kronrod quadrature, bracketing root finding, an embedded
Runge-Kutta stepper with boundary events, and exact dyadic scalars for
geometry that is far below binary64 resolution.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Callable, Optional

import numpy as np

ScalarMap = Callable[[float], float]


class QuadratureBudgetError(RuntimeError):
    """Raised when adaptive quadrature exhausts its evaluation budget."""

    def __init__(self, message: str, best: "QuadratureResult"):
        super().__init__(message)
        self.best = best


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


class StiffnessError(RuntimeError):
    """The step size collapsed below the resolvable limit."""


# ---------------------------------------------------------------------------
# Dyadic scalars
# ---------------------------------------------------------------------------


@total_ordering
@dataclass(frozen=True)
class DyadicScalar:
    """Exact value ``mantissa * 2**exponent``.

    The canonical form keeps the mantissa odd, or stores zero as ``(0, 0)``.
    """

    mantissa: int
    exponent: int = 0

    def __post_init__(self) -> None:
        m, e = int(self.mantissa), int(self.exponent)
        if m == 0:
            e = 0
        else:
            tz = (m & -m).bit_length() - 1
            m >>= tz
            e += tz
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def pow2(cls, k: int) -> "DyadicScalar":
        return cls(1, k)

    @classmethod
    def from_fraction(cls, value: Fraction | int) -> "DyadicScalar":
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        return cls(value.numerator, -(den.bit_length() - 1))

    @staticmethod
    def _coerce(other) -> "DyadicScalar":
        if isinstance(other, DyadicScalar):
            return other
        if isinstance(other, (int, Fraction)):
            return DyadicScalar.from_fraction(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        e = min(self.exponent, other.exponent)
        m = (self.mantissa << (self.exponent - e)) + (other.mantissa << (other.exponent - e))
        return DyadicScalar(m, e)

    __radd__ = __add__

    def __neg__(self) -> "DyadicScalar":
        return DyadicScalar(-self.mantissa, self.exponent)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return DyadicScalar(self.mantissa * other.mantissa, self.exponent + other.exponent)

    __rmul__ = __mul__

    def _cmp_key(self, other: "DyadicScalar") -> tuple[int, int]:
        e = min(self.exponent, other.exponent)
        return self.mantissa << (self.exponent - e), other.mantissa << (other.exponent - e)

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.mantissa == other.mantissa and self.exponent == other.exponent

    def __lt__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._cmp_key(other)
        return a < b

    def __hash__(self) -> int:
        return hash(self.to_fraction())

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa << self.exponent)
        return Fraction(self.mantissa, 1 << -self.exponent)

    def __float__(self) -> float:
        # float(Fraction) rounds correctly and underflows to 0.0
        return float(self.to_fraction())

    def log2(self) -> float:
        """Base-2 logarithm of the absolute value, finite even when the value underflows."""
        if self.mantissa == 0:
            return -math.inf
        m = abs(self.mantissa)
        shift = max(m.bit_length() - 60, 0)
        return math.log2(m >> shift) + shift + self.exponent

    def __repr__(self) -> str:
        return f"DyadicScalar({self.mantissa}, {self.exponent})"


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
# Full symmetric node set on [-1, 1] and matching weights.
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[9:15:2] = _WG[:3][::-1]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int


def _gk15(fn, a: float, b: float, vectorized: bool) -> tuple[float, float]:
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    xs = mid + half * _NODES
    if vectorized:
        ys = np.asarray(fn(xs), dtype=float)
    else:
        ys = np.array([fn(float(x)) for x in xs], dtype=float)
    kron = half * float(_KW @ ys)
    gauss = half * float(_GW @ ys)
    return kron, abs(kron - gauss)


def integrate_adaptive(
    fn: ScalarMap,
    a: float,
    b: float,
    tol: float = 1e-10,
    *,
    max_evals: int = 200_000,
    vectorized: bool = False,
) -> QuadratureResult:
    """Globally adaptive Gauss-Kronrod (7, 15) quadrature of ``fn`` on ``[a, b]``.

    The interval with the largest local error is bisected until the summed
    error estimate is below ``tol`` (or below the rounding floor of the sum).
    """
    if not a <= b:
        raise ValueError(f"need a <= b, got [{a}, {b}]")
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)
    value, err = _gk15(fn, a, b, vectorized)
    evals = 15
    heap = [(-err, a, b, value)]
    total, total_err = value, err
    while True:
        floor = 64 * np.finfo(float).eps * abs(total)
        if total_err <= max(tol, floor):
            return QuadratureResult(total, total_err, evals)
        if evals + 30 > max_evals:
            best = QuadratureResult(total, total_err, evals)
            raise QuadratureBudgetError(
                f"quadrature did not reach tol={tol} within {max_evals} evaluations", best
            )
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            # interval cannot be split further in floating point
            best = QuadratureResult(total, total_err, evals)
            raise QuadratureBudgetError("interval collapsed during refinement", best)
        v1, e1 = _gk15(fn, lo, mid, vectorized)
        v2, e2 = _gk15(fn, mid, hi, vectorized)
        evals += 30
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        if len(heap) % 64 == 0:
            # re-sum occasionally to keep the running totals honest
            total = math.fsum(item[3] for item in heap)
            total_err = math.fsum(-item[0] for item in heap)


def integrate_sqrt_endpoint(
    fn: ScalarMap, a: float, b: float, tol: float = 1e-10, **kwargs
) -> QuadratureResult:
    """Integrate ``fn`` on ``[a, b]`` when it blows up like ``(z - a)**-0.5`` at ``a``.

    Uses ``z = a + s**2`` so the transformed integrand ``2 s fn(a + s**2)`` is smooth.
    """
    if not a <= b:
        raise ValueError(f"need a <= b, got [{a}, {b}]")

    def smooth(s: float) -> float:
        if s == 0.0:
            return 0.0 if not math.isfinite(fn(a)) else 2.0 * s * fn(a)
        return 2.0 * s * fn(a + s * s)

    return integrate_adaptive(smooth, 0.0, math.sqrt(b - a), tol, **kwargs)


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


def find_root(
    fn: ScalarMap,
    lo: float,
    hi: float,
    tol: float = 1e-12,
    *,
    max_iter: int = 400,
    accelerate: bool = True,
) -> float:
    """Bracketing root finder.

    Plain bisection guarantees progress; with ``accelerate`` a secant (Illinois)
    proposal is tried first and accepted only when it shrinks the bracket by at
    least half, otherwise the step falls back to bisection.
    Returns a point whose final bracket is no wider than ``tol``.
    """
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    for _ in range(max_iter):
        width = hi - lo
        if width <= tol:
            break
        x = 0.5 * (lo + hi)
        if accelerate:
            cand = hi - fhi * (hi - lo) / (fhi - flo)
            if lo < cand < hi:
                x = cand
        fx = fn(x)
        if fx == 0.0:
            return x
        if (fx > 0) == (flo > 0):
            lo, flo = x, fx
            if accelerate:
                fhi *= 0.5
        else:
            hi, fhi = x, fx
            if accelerate:
                flo *= 0.5
        if accelerate and hi - lo > 0.5 * width:
            # secant stalled: force a bisection step
            m = 0.5 * (lo + hi)
            fm = fn(m)
            if fm == 0.0:
                return m
            if (fm > 0) == (flo > 0):
                lo, flo = m, fm
            else:
                hi, fhi = m, fm
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# ODE stepping
# ---------------------------------------------------------------------------

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


@dataclass
class OdeTrace:
    """Sampled solution of a scalar ODE."""

    ts: list[float] = field(default_factory=list)
    xs: list[float] = field(default_factory=list)
    event_hit: bool = False
    steps: int = 0
    rejected: int = 0


def _dp_step(rhs, t: float, x: float, h: float, k1: float) -> tuple[float, float, float]:
    ks = [k1]
    for i in range(1, 7):
        xi = x + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(rhs(t + _C[i] * h, xi))
    x_new = x + h * sum(b * k for b, k in zip(_B5, ks))
    err = h * sum(e * k for e, k in zip(_E, ks))
    return x_new, err, ks[-1]


def ode_step_trace(
    rhs: Callable[[float, float], float],
    start: tuple[float, float],
    t_end: float,
    step_tol: float = 1e-10,
    event: Optional[Callable[[float, float], float]] = None,
    *,
    atol: Optional[float] = None,
    h0: Optional[float] = None,
    max_steps: int = 200_000,
) -> OdeTrace:
    """Integrate ``x' = rhs(t, x)`` from ``start`` to ``t_end`` (either direction).

    Each accepted step has an estimated local error below
    ``atol + step_tol * |x|`` scaled by ``min(1, |h|)``.
    ``event(t, x)`` is a boundary function; integration stops at the first
    sign change, located by bisection to ``step_tol`` in time.
    """
    t, x = float(start[0]), float(start[1])
    atol = step_tol if atol is None else atol
    direction = 1.0 if t_end >= t else -1.0
    span = abs(t_end - t)
    out = OdeTrace([t], [x])
    if span == 0.0:
        return out
    h = direction * (h0 if h0 is not None else min(span, 0.01 * max(span, 1e-3)))
    k1 = rhs(t, x)
    g_prev = event(t, x) if event is not None else None
    while direction * (t_end - t) > 0:
        if out.steps >= max_steps:
            raise StiffnessError(f"step budget exhausted at t={t}")
        if direction * (t + h - t_end) > 0:
            h = t_end - t
        x_new, err, k7 = _dp_step(rhs, t, x, h, k1)
        scale = (atol + step_tol * max(abs(x), abs(x_new))) * min(1.0, abs(h))
        ratio = abs(err) / scale if scale > 0 else math.inf
        if not math.isfinite(x_new):
            ratio = math.inf
        if ratio <= 1.0:
            t_new = t + h if abs(t_end - (t + h)) > 0 else t_end
            if event is not None:
                g_new = event(t_new, x_new)
                if (g_prev < 0 < g_new) or (g_prev > 0 > g_new) or g_new == 0.0:
                    t_hit, x_hit = _locate_event(rhs, event, t, x, k1, h, g_prev, step_tol)
                    out.ts.append(t_hit)
                    out.xs.append(x_hit)
                    out.event_hit = True
                    out.steps += 1
                    return out
                g_prev = g_new
            t, x, k1 = t_new, x_new, k7
            out.ts.append(t)
            out.xs.append(x)
            out.steps += 1
            grow = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** -0.2)
            h *= grow
        else:
            out.rejected += 1
            shrink = 0.2 if not math.isfinite(ratio) else max(0.2, 0.9 * ratio ** -0.25)
            h *= shrink
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            raise StiffnessError(f"step size underflow at t={t}, x={x}")
    return out


def _locate_event(rhs, event, t, x, k1, h, g0, tol) -> tuple[float, float]:
    """Bisect the step ``[t, t+h]`` on the sign of ``event`` using exact sub-steps."""
    lo, hi = 0.0, h
    x_hi, _, _ = _dp_step(rhs, t, x, h, k1)
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        x_mid, _, _ = _dp_step(rhs, t, x, mid, k1)
        g_mid = event(t + mid, x_mid)
        if g_mid == 0.0:
            return t + mid, x_mid
        if (g_mid > 0) == (g0 > 0):
            lo = mid
        else:
            hi, x_hi = mid, x_mid
    if hi == h:
        x_hi, _, _ = _dp_step(rhs, t, x, hi, k1)
    return t + hi, x_hi
