"""C2 characteristic segments with flat endpoints and a prescribed displacement.

Along the segment ``u`` rises from 0 and returns to 0 with ``|du/dt| <= 1``;
the curve is recovered by integrating ``f'(u(t))``.  Two profile families are
used: a ramp with quadratic rounding of width ``tau`` (large displacements) and
a pure quadratic bump of height ``tau * b**2 / 8`` (small displacements).
All displacement integrals are carried in log space so that targets far
below binary64 resolution can still be solved for.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .flux import FluxModel
from .numerics import find_root, integrate_adaptive, integrate_sqrt_endpoint

INCREASING = "increasing"
DECREASING = "decreasing"


class UnattainableDisplacementError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    """Increasing half of a symmetric bump on ``[0, b]``."""

    b: float
    case: str  # "big" or "small"
    tau: float

    def breakpoints(self) -> tuple:
        half = 0.5 * self.b
        if self.case == "big":
            return (0.0, self.tau, half - self.tau, half)
        return (0.0, 0.25 * self.b, half)

    def u_half(self, t: float) -> float:
        b, tau = self.b, self.tau
        half = 0.5 * b
        if self.case == "big":
            if t <= tau:
                return t * t / (2.0 * tau)
            if t <= half - tau:
                return t - 0.5 * tau
            return half - tau - (t - half) ** 2 / (2.0 * tau)
        if t <= 0.25 * b:
            return tau * t * t
        return tau * b * b / 8.0 - tau * (t - half) ** 2

    def udot_half(self, t: float) -> float:
        b, tau = self.b, self.tau
        half = 0.5 * b
        if self.case == "big":
            if t <= tau:
                return t / tau
            if t <= half - tau:
                return 1.0
            return (half - t) / tau
        if t <= 0.25 * b:
            return 2.0 * tau * t
        return (b - 2.0 * t) * tau

    def u(self, t: float) -> float:
        return self.u_half(t if t <= 0.5 * self.b else self.b - t)

    def udot(self, t: float) -> float:
        if t <= 0.5 * self.b:
            return self.udot_half(t)
        return -self.udot_half(self.b - t)

    @property
    def peak(self) -> float:
        return self.u_half(0.5 * self.b)


def profile_for_parameter(b: float, s: float) -> Profile:
    """Map ``s`` in [0, 2) onto the two families, joined continuously at ``s = 1``.

    ``s`` in [0, 1]: small case with ``tau = 2 s / b``; ``s`` in (1, 2): big
    case with ``tau = (2 - s) b / 4``.  Displacement increases with ``s``.
    """
    if s <= 1.0:
        return Profile(b, "small", s * 2.0 / b)
    return Profile(b, "big", (2.0 - s) * b / 4.0)


_MAX_SPLITS = 60
_RESOLVED_DROP = math.log(1e3)


def _log_integral(log_fn: Callable[[float], float], lo: float, hi: float, ref: float) -> float:
    """log of the integral of exp(log_fn) on [lo, hi], computed relative to exp(ref)."""
    if hi <= lo:
        return -math.inf

    def scaled(r: float) -> float:
        v = log_fn(r) - ref
        return math.exp(v) if v > -745.0 else 0.0

    # the mass can sit in a sliver at the larger end, invisible to a single
    # Gauss-Kronrod panel; halve towards that end until the sliver's inner
    # edge is within a factor 1e3 of the peak, then sum outward from the peak
    # so every tolerance is relative to what is already known
    width = hi - lo
    peak_at_hi = log_fn(hi) >= log_fn(lo)
    peak = log_fn(hi if peak_at_hi else lo)
    k = 1
    while k < _MAX_SPLITS:
        edge = hi - width * 2.0 ** -k if peak_at_hi else lo + width * 2.0 ** -k
        if log_fn(edge) >= peak - _RESOLVED_DROP:
            break
        k += 1
    if peak_at_hi:
        cuts = [lo] + [hi - width * 2.0 ** -j for j in range(1, k + 1)] + [hi]
    else:
        cuts = [lo] + [lo + width * 2.0 ** -j for j in range(k, 0, -1)] + [hi]
    panels = [(p, q) for p, q in zip(cuts[:-1], cuts[1:]) if q > p]
    if peak_at_hi:
        panels.reverse()
    # exp(log_fn - ref) carries relative noise of order eps*|ref|
    noise = max(1e-12, 64.0 * sys.float_info.epsilon * max(1.0, abs(ref)))
    total = 0.0
    for p, q in panels:
        if total > 0.0:
            # the integrand is monotone on a piece, so everything beyond this
            # panel is at most its inner edge value times the remaining width
            edge, rest = (q, q - lo) if peak_at_hi else (p, hi - p)
            if scaled(edge) * rest <= noise * total:
                break
        if total == 0.0:
            rough = integrate_adaptive(scaled, p, q, 1e-8 * (q - p)).value
            if rough <= 0.0:
                continue
            total += integrate_adaptive(scaled, p, q, noise * rough).value
        else:
            total += integrate_adaptive(scaled, p, q, noise * total).value
    return ref + math.log(total) if total > 0 else -math.inf


def _log_partial(flux: FluxModel, prof: Profile, t: float) -> float:
    """log of the displacement accumulated on ``[0, t]`` with ``t <= b/2``."""
    phi = lambda r: flux.log_deriv(prof.u_half(r))
    ref = phi(t)
    if ref == -math.inf:
        return -math.inf
    pieces = [p for p in prof.breakpoints() if p < t] + [t]
    logs = [_log_integral(phi, lo, hi, ref) for lo, hi in zip(pieces[:-1], pieces[1:])]
    logs = [x for x in logs if x > -math.inf]
    if not logs:
        return -math.inf
    m = max(logs)
    return m + math.log(sum(math.exp(x - m) for x in logs))


def log_half_displacement(flux: FluxModel, prof: Profile) -> float:
    if prof.tau == 0.0 and prof.case == "small":
        return -math.inf
    return _log_partial(flux, prof, 0.5 * prof.b)


def log_displacement(flux: FluxModel, prof: Profile) -> float:
    return math.log(2.0) + log_half_displacement(flux, prof)


# ---------------------------------------------------------------------------
# Displacement formula in the state variable
# ---------------------------------------------------------------------------


def profile_displacement(
    flux: FluxModel,
    u_a: float,
    v: Callable[[float], float],
    a: float,
    t: float,
    *,
    U: Optional[Callable[[float], float]] = None,
    breakpoints: Optional[Sequence[float]] = None,
    tol: float = 1e-13,
) -> float:
    """Displacement of a characteristic along which ``du/dt = v``, from time ``a`` to ``t``.

    Computed as the integral of ``f'(z) / v(U^{-1}(z))`` over ``z`` between
    ``u_a`` and ``u_t``.  Square-root blow-ups where ``v`` vanishes at either
    end are removed by ``z = u_a + s^2`` (resp. ``z = u_t - s^2``).
    ``U`` is the state along the curve; when omitted it is built from ``v``
    by quadrature.  The ``z`` range is split at the states reached at
    ``breakpoints`` (times where ``v`` has kinks), or at eight equal time
    steps when none are given, so no kink hides inside a single panel.
    """
    if t <= a:
        return 0.0
    probes = np.linspace(a, t, 33)[1:-1]
    if any(v(float(s)) <= 0 for s in probes):
        raise ValueError("profile v must be positive on (a, t)")
    if U is None:
        def U(s: float) -> float:
            return u_a + integrate_adaptive(v, a, s, 1e-14).value
    u_t = U(t)
    if u_t == u_a:
        return 0.0

    def time_of(z: float) -> float:
        if z <= u_a:
            return a
        if z >= u_t:
            return t
        return find_root(lambda s: U(s) - z, a, t, 1e-15 * max(1.0, abs(t)))

    def integrand(z: float) -> float:
        rate = v(time_of(z))
        if rate <= 0:
            return 0.0
        return flux.deriv(z) / rate

    if breakpoints is None:
        breakpoints = np.linspace(a, t, 9)[1:-1]
    knots = sorted({u_a, u_t, 0.5 * (u_a + u_t)}
                   | {U(float(s)) for s in breakpoints if a < s < t})
    knots = [z for z in knots if u_a <= z <= u_t]
    panels = list(zip(knots[:-1], knots[1:]))
    share = tol / len(panels)
    total = 0.0
    for k, (lo, hi) in enumerate(panels):
        if hi <= lo:
            continue
        if k == len(panels) - 1:
            total += _reflected(integrand, lo, hi, share)
        else:
            total += integrate_sqrt_endpoint(integrand, lo, hi, share).value
    return total


def _reflected(fn: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Integral of ``fn`` on ``[lo, hi]`` with a square-root blow-up at ``hi``."""
    return integrate_sqrt_endpoint(lambda y: fn(hi - (y - lo)), lo, hi, tol).value


# ---------------------------------------------------------------------------
# Junction curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JunctionCurve:
    flux: FluxModel
    b: float
    c: float
    case: str
    tau: float
    orientation: str
    x0: float = 0.0
    log_c: float = -math.inf
    _shape_flux: FluxModel = field(default=None, repr=False, compare=False)

    @property
    def profile(self) -> Profile:
        return Profile(self.b, self.case, self.tau)

    @property
    def sign(self) -> float:
        return 1.0 if self.orientation == INCREASING else -1.0

    def log_offset(self, t: float) -> float:
        """log |gamma(t) - gamma(0)|."""
        prof = self.profile
        if self.tau == 0.0 and self.case == "small":
            return -math.inf
        half = 0.5 * self.b
        if t <= half:
            return _log_partial(self._shape_flux, prof, t)
        # total minus the mirrored tail
        tail = _log_partial(self._shape_flux, prof, self.b - t)
        if tail == -math.inf:
            return self.log_c
        diff = 1.0 - math.exp(tail - self.log_c)
        return self.log_c + math.log(diff) if diff > 0 else -math.inf

    def with_origin(self, x0: float) -> "JunctionCurve":
        return JunctionCurve(self.flux, self.b, self.c, self.case, self.tau,
                             self.orientation, x0, self.log_c, self._shape_flux)


def _shape_flux(flux: FluxModel, orientation: str) -> FluxModel:
    if orientation == INCREASING:
        return flux
    if orientation == DECREASING:
        return flux.mirrored()
    raise ValueError(f"unknown orientation {orientation!r}")


def _finish(flux, shape, b, prof, orientation, x0, log_c) -> JunctionCurve:
    c = math.exp(log_c) if log_c > -math.inf else 0.0
    return JunctionCurve(flux, b, c, prof.case, prof.tau, orientation, x0, log_c, shape)


def junction_from_tau(
    flux: FluxModel, b: float, tau: float, case: str = "big",
    orientation: str = INCREASING, x0: float = 0.0,
) -> JunctionCurve:
    """Junction with a fixed profile parameter instead of a target displacement."""
    if case == "big" and not 0 < tau <= b / 4:
        raise ValueError("big-case tau must lie in (0, b/4]")
    if case == "small" and not 0 <= tau <= 2 / b:
        raise ValueError("small-case tau must lie in [0, 2/b]")
    shape = _shape_flux(flux, orientation)
    prof = Profile(b, case, tau)
    return _finish(flux, shape, b, prof, orientation, x0, log_displacement(shape, prof))


def displacement_bound(flux: FluxModel, b: float, orientation: str = INCREASING) -> float:
    """Supremum ``2 (f(b/2) - f(0))`` of attainable displacements (for the shape flux)."""
    shape = _shape_flux(flux, orientation)
    return 2.0 * (shape.eval(0.5 * b) - shape.eval(0.0))


def big_case_threshold(flux: FluxModel, b: float, orientation: str = INCREASING) -> float:
    """Displacement of the ``tau = b/4`` profile, where the two families meet."""
    shape = _shape_flux(flux, orientation)
    return math.exp(log_displacement(shape, Profile(b, "big", b / 4.0)))


def _solve_parameter(shape: FluxModel, b: float, log_target: float, tol: float) -> Profile:
    g = lambda s: log_displacement(shape, profile_for_parameter(b, s)) - log_target
    # branch on g itself so the bracket test and the root search agree to the last bit
    g_mid = g(1.0)
    if g_mid == 0.0:
        return profile_for_parameter(b, 1.0)
    lo, hi = (1.0, 2.0) if g_mid < 0 else (0.0, 1.0)
    if lo == 1.0:
        # the log displacement is finite at s=1 and tends to log 2f(b/2) as s -> 2
        hi_s = 2.0 - 1e-15
        s = find_root(g, lo, hi_s, tol)
    else:
        # g(0) = -inf; step away from zero geometrically to find a finite bracket
        left = 0.5
        while g(left) > 0:
            left *= 0.5
            if left < 1e-300:
                break
        s = find_root(g, left, hi, tol)
    return profile_for_parameter(b, s)


def build_junction(
    flux: FluxModel, b: float, c: float, orientation: str = INCREASING,
    x0: float = 0.0, tol: float = 1e-15,
) -> JunctionCurve:
    """Junction on ``[0, b]`` moving by ``c`` (upward when increasing, downward when decreasing)."""
    if c < 0:
        raise ValueError("displacement magnitude must be nonnegative")
    bound = displacement_bound(flux, b, orientation)
    if c >= bound:
        raise UnattainableDisplacementError(
            f"displacement {c} is not below the bound 2f(b/2) = {bound}"
        )
    shape = _shape_flux(flux, orientation)
    if c == 0:
        return _finish(flux, shape, b, Profile(b, "small", 0.0), orientation, x0, -math.inf)
    prof = _solve_parameter(shape, b, math.log(c), tol)
    return _finish(flux, shape, b, prof, orientation, x0, log_displacement(shape, prof))


def build_junction_log(
    flux: FluxModel, b: float, log_c: float, orientation: str = INCREASING,
    x0: float = 0.0, tol: float = 1e-15,
) -> JunctionCurve:
    """As :func:`build_junction` with the displacement given by its natural log."""
    shape = _shape_flux(flux, orientation)
    if log_c == -math.inf:
        return _finish(flux, shape, b, Profile(b, "small", 0.0), orientation, x0, -math.inf)
    bound = displacement_bound(flux, b, orientation)
    if bound > 0 and log_c >= math.log(bound):
        raise UnattainableDisplacementError("displacement is not below 2f(b/2)")
    prof = _solve_parameter(shape, b, log_c, tol)
    return _finish(flux, shape, b, prof, orientation, x0, log_displacement(shape, prof))


def eval_junction(curve: JunctionCurve, t: float) -> tuple[float, float, float]:
    """Position, state and state derivative at local time ``t`` in ``[0, b]``."""
    if not 0.0 <= t <= curve.b:
        raise ValueError(f"t={t} outside [0, {curve.b}]")
    prof = curve.profile
    s = curve.sign
    if curve.tau == 0.0 and curve.case == "small":
        return curve.x0, 0.0, 0.0
    lo = curve.log_offset(t)
    offset = math.exp(lo) if lo > -math.inf else 0.0
    return curve.x0 + s * offset, s * prof.u(t), s * prof.udot(t)


def sample_junction(curve: JunctionCurve, n: int = 101) -> np.ndarray:
    """Rows ``(t, x, u, udot)`` on a uniform grid, ready for CSV export."""
    ts = np.linspace(0.0, curve.b, n)
    return np.array([(t, *eval_junction(curve, float(t))) for t in ts])


# ---------------------------------------------------------------------------
# Families of junctions sharing (flux, b, orientation)
# ---------------------------------------------------------------------------


PARAMETER_MAX = 2.0 - 1e-15


class JunctionFamily:
    """Junctions over one corridor sharing ``(flux, b, orientation)``.

    Members are indexed either by the log of their displacement or directly
    by the profile parameter ``s`` of :func:`profile_for_parameter`; the
    displacement is increasing in ``s``.  Targets above the largest
    displacement reachable at ``PARAMETER_MAX`` are clamped to that member
    (this only happens within a relative 1e-13 of ``2f(b/2)``).
    """

    def __init__(self, flux: FluxModel, b: float, orientation: str = INCREASING,
                 tol: float = 1e-15):
        self.flux = flux
        self.b = b
        self.orientation = orientation
        self.tol = tol
        self.shape = _shape_flux(flux, orientation)
        self._log_disp = lru_cache(maxsize=65536)(self._log_disp_uncached)
        self._by_log = lru_cache(maxsize=4096)(self._by_log_uncached)

    def _log_disp_uncached(self, s: float) -> float:
        if s <= 0.0:
            return -math.inf
        return log_displacement(self.shape, profile_for_parameter(self.b, s))

    def log_displacement(self, s: float) -> float:
        return self._log_disp(s)

    def log_partial(self, s: float, t: float) -> float:
        """log of the offset reached at local time ``t`` by member ``s``."""
        return self.curve_at(s).log_offset(t)

    def curve_at(self, s: float, x0: float = 0.0) -> JunctionCurve:
        prof = profile_for_parameter(self.b, s) if s > 0 else Profile(self.b, "small", 0.0)
        return _finish(self.flux, self.shape, self.b, prof, self.orientation, x0,
                       self._log_disp(s))

    def _by_log_uncached(self, log_c: float) -> float:
        if log_c == -math.inf:
            return 0.0
        if log_c >= self._log_disp(PARAMETER_MAX):
            return PARAMETER_MAX
        g = lambda s: self._log_disp(s) - log_c
        log_mid = self._log_disp(1.0)
        if log_c >= log_mid:
            return find_root(g, 1.0, PARAMETER_MAX, self.tol)
        left = 0.5
        while g(left) > 0 and left > 1e-300:
            left *= 0.5
        return find_root(g, left, 1.0, self.tol)

    def parameter_for(self, log_c: float) -> float:
        return self._by_log(log_c)

    def curve(self, log_c: float, x0: float = 0.0) -> JunctionCurve:
        return self.curve_at(self._by_log(log_c), x0)
