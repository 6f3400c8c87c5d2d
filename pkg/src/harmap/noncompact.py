"""Harmonic self-maps of non-compact warped products by metric deformation.

The manifold is R^(k0+1) x (product of compact factors) with metric

    dt^2 + f0(t)^2 g_sphere + sum_i f_i(t)^2 g_i,

f0(0) = 0, f0'(0) = 1, f_i(0) = a_i > 0, f_i'(0) = 0.  An equivariant map
with profile r(t) is harmonic iff

    r'' + (sum k_i f_i'(t)/f_i(t)) r' - sum k_i f_i(r) f_i'(r) / f_i(t)^2 = 0,

singular at t = 0.  The pipeline: solve the singular IVP with a cubic
series launch, extend r strictly monotonically past a cut eps, and make the
extension harmonic by scaling each orbit factor with exp(2 alpha_i(t)) where

    sum k_i alpha_i'(t) = -r''/r' - sum k_i f_i'(t)/f_i(t)
                          + sum k_i f_i(r) f_i'(r) / (f_i(t)^2 r').

The sign of the last term is fixed by solving the deformed harmonicity
equation for sum k_i alpha_i'; the residual check below discriminates it
against the opposite ("literal") variant, which fails by O(1).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._rk import DIVERGED, OK, STEPLIMIT, UNDERFLOW, dp45_second_order
from .errors import (
    Diverged,
    DerivativeVanishes,
    JoinMismatch,
    MonotonicityLost,
    ProfileSingular,
    SplitWeightsInvalid,
    StepLimitExceeded,
    StepUnderflow,
    ValidationError,
)
from .integrate import StepStats, _hermite, hermite_eval_scalar
from .quadrature import gk_quad

SIGN_CORRECTED = "corrected"
SIGN_PAPER_LITERAL = "paper_literal"


# ---------------------------------------------------------------------------
# Warping profiles

class Cone:
    """f(t) = t: the flat radial profile of R^(k0+1)."""

    kind = "cone"

    def f(self, t):
        if isinstance(t, float):
            return t
        return np.asarray(t, dtype=float) + 0.0 if not np.isscalar(t) else float(t)

    def fdot(self, t):
        if isinstance(t, float) or np.isscalar(t):
            return 1.0
        return np.ones_like(t, dtype=float)

    def fddot(self, t):
        if isinstance(t, float) or np.isscalar(t):
            return 0.0
        return np.zeros_like(t, dtype=float)

    def describe(self):
        return {"profile": "cone"}


class SmoothedCone:
    """f(t) = sqrt(a^2 + t^2): asymptotically conical, f(0) = a."""

    kind = "smoothed_cone"

    def __init__(self, a: float):
        if a <= 0.0:
            raise ValidationError("smoothed cone needs a > 0")
        self.a = float(a)

    def f(self, t):
        if isinstance(t, float):
            return math.sqrt(self.a * self.a + t * t)
        return np.sqrt(self.a * self.a + np.square(t))

    def fdot(self, t):
        return t / self.f(t)

    def fddot(self, t):
        ft = self.f(t)
        return self.a * self.a / (ft * ft * ft)

    def describe(self):
        return {"profile": "smoothed_cone", "a": self.a}


class CoshCollar:
    """f(t) = a cosh(t/a): exponentially opening collar, f(0) = a."""

    kind = "cosh_collar"

    def __init__(self, a: float):
        if a <= 0.0:
            raise ValidationError("cosh collar needs a > 0")
        self.a = float(a)

    def f(self, t):
        if isinstance(t, float):
            return self.a * math.cosh(t / self.a)
        return self.a * np.cosh(t / self.a)

    def fdot(self, t):
        if isinstance(t, float):
            return math.sinh(t / self.a)
        return np.sinh(t / self.a)

    def fddot(self, t):
        if isinstance(t, float):
            return math.cosh(t / self.a) / self.a
        return np.cosh(t / self.a) / self.a

    def describe(self):
        return {"profile": "cosh_collar", "a": self.a}


class Tabulated:
    """Sampled (t, f, f', f'') with monotone-cubic interpolation per channel."""

    kind = "tabulated"

    def __init__(self, ts, fs, fdots, fddots, path: Optional[str] = None):
        ts = np.asarray(ts, dtype=float)
        if ts.ndim != 1 or len(ts) < 4:
            raise ValidationError("tabulated profile needs >= 4 samples")
        if np.any(np.diff(ts) <= 0.0):
            raise ValidationError("tabulated abscissae must increase strictly")
        self.ts = ts
        self._f = PchipInterpolator(ts, np.asarray(fs, dtype=float))
        self._fd = PchipInterpolator(ts, np.asarray(fdots, dtype=float))
        self._fdd = PchipInterpolator(ts, np.asarray(fddots, dtype=float))
        self.path = path

    def f(self, t):
        out = self._f(t)
        return float(out) if np.isscalar(t) else out

    def fdot(self, t):
        out = self._fd(t)
        return float(out) if np.isscalar(t) else out

    def fddot(self, t):
        out = self._fdd(t)
        return float(out) if np.isscalar(t) else out

    def describe(self):
        return {"profile": "tabulated", "tab_path": self.path or ""}


def check_profile_consistency(profile, lo: float, hi: float, n: int = 41, tol: float = 1e-6):
    """Central finite difference of f must match fdot on a test grid."""
    ts = np.linspace(lo, hi, n)
    h = 1e-5 * max(1.0, hi - lo)
    fd = (np.asarray(profile.f(ts + h)) - np.asarray(profile.f(ts - h))) / (2.0 * h)
    dev = float(np.max(np.abs(fd - np.asarray(profile.fdot(ts)))))
    if dev > tol:
        raise ValidationError(
            f"profile derivative inconsistent with finite difference ({dev:.2e} > {tol:g})"
        )
    return dev


# ---------------------------------------------------------------------------
# The warped metric

@dataclass(frozen=True)
class Component:
    k: int
    a: float
    profile: object

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("component dimension k must be >= 1")
        if self.a <= 0.0:
            raise ValidationError("component scale a must be > 0")


@dataclass(frozen=True)
class WarpedMetric:
    """Sphere factor dimension k0 and the compact factors (k_i, a_i, f_i).

    The compact factors are assumed irreducible and non-flat; this never
    enters the equations and is recorded as a user assertion only.
    """

    k0: int
    components: tuple
    f0: object = field(default_factory=Cone)

    def __post_init__(self):
        if self.k0 < 2:
            raise ValidationError("k0 must be >= 2")
        object.__setattr__(self, "components", tuple(self.components))
        # singular-orbit initial values, checked numerically
        d = 1e-7
        f00 = float(self.f0.f(0.0))
        f0d = float(self.f0.fdot(0.0))
        if abs(f00) > 1e-10 or abs(f0d - 1.0) > 1e-10:
            raise ValidationError(
                f"sphere profile must satisfy f(0)=0, f'(0)=1, got ({f00}, {f0d})"
            )
        for i, c in enumerate(self.components):
            fi0 = float(c.profile.f(0.0))
            fid = float(c.profile.fdot(0.0))
            if abs(fi0 - c.a) > 1e-10 * max(1.0, c.a) or abs(fid) > 1e-10:
                raise ValidationError(
                    f"factor {i}: need f(0)=a={c.a}, f'(0)=0, got ({fi0}, {fid})"
                )
        del d
        object.__setattr__(
            self,
            "_pairs",
            ((self.k0, self.f0),) + tuple((c.k, c.profile) for c in self.components),
        )

    @property
    def k_total(self) -> int:
        return self.k0 + sum(c.k for c in self.components)

    def dims(self) -> tuple:
        return (self.k0,) + tuple(c.k for c in self.components)

    def pairs(self):
        """(k_i, profile_i) over all factors, the sphere one first."""
        return self._pairs

    def drift(self, t: float) -> float:
        """sum k_i f_i'(t) / f_i(t); raises if any profile is non-positive."""
        t = float(t)
        s = 0.0
        for k, prof in self._pairs:
            ft = prof.f(t)
            if ft <= 0.0:
                raise ProfileSingular(f"profile {prof.kind} non-positive at t={t}")
            s += k * prof.fdot(t) / ft
        return s

    def force(self, t: float, r: float) -> float:
        """sum k_i f_i(r) f_i'(r) / f_i(t)^2."""
        t = float(t)
        r = float(r)
        s = 0.0
        for k, prof in self._pairs:
            ft = prof.f(t)
            if ft <= 0.0:
                raise ProfileSingular(f"profile {prof.kind} non-positive at t={t}")
            s += k * prof.f(r) * prof.fdot(r) / (ft * ft)
        return s

    def rhs(self, t: float, r: float, rp: float) -> float:
        return -self.drift(t) * rp + self.force(t, r)

    def f0_cubic_jet(self) -> float:
        """Coefficient b0 of f0(t) = t + b0 t^3 + ..., from f0'' near 0.

        Smooth extension over the singular orbit forces an odd jet for f0,
        so f0''(t) = 6 b0 t + O(t^3); one Richardson step removes the O(t^3).
        """
        d = 1e-3
        e1 = float(self.f0.fddot(d)) / (6.0 * d)
        e2 = float(self.f0.fddot(0.5 * d)) / (3.0 * d)
        return (4.0 * e2 - e1) / 3.0


# ---------------------------------------------------------------------------
# Singular IVP

@dataclass(frozen=True)
class TimeTrajectory:
    """Samples of the radial profile r(t) with dense Hermite output."""

    ts: np.ndarray
    rs: np.ndarray
    rps: np.ndarray
    rpps: np.ndarray
    errs: np.ndarray
    tol: float
    stats: StepStats
    delta: float = 0.0
    r3: float = 0.0

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    def __len__(self):
        return len(self.ts)

    def eval(self, t):
        if np.isscalar(t):
            return hermite_eval_scalar(self.ts, self.rs, self.rps, self.rpps, float(t))
        tq = np.asarray(t, dtype=float)
        if tq.min() < self.ts[0] - 1e-12 or tq.max() > self.ts[-1] + 1e-12:
            raise ValidationError("dense evaluation outside the sample range")
        idx = np.clip(np.searchsorted(self.ts, tq, side="right") - 1, 0, len(self.ts) - 2)
        h = self.ts[idx + 1] - self.ts[idx]
        s = np.clip((tq - self.ts[idx]) / h, 0.0, 1.0)
        r = _hermite(self.rs[idx], self.rps[idx] * h, self.rs[idx + 1], self.rps[idx + 1] * h, s)
        rp = _hermite(self.rps[idx], self.rpps[idx] * h, self.rps[idx + 1], self.rpps[idx + 1] * h, s)
        return r, rp

    def restrict(self, t_hi: float) -> "TimeTrajectory":
        mask = self.ts <= t_hi + 1e-12
        if mask.sum() < 2:
            raise ValidationError("restriction keeps too few samples")
        return replace(
            self,
            ts=self.ts[mask],
            rs=self.rs[mask],
            rps=self.rps[mask],
            rpps=self.rpps[mask],
            errs=self.errs[mask],
        )


def launch_coefficient(metric: WarpedMetric, v: float) -> float:
    """Cubic coefficient r3 of r(t) = v t + r3 t^3 + O(t^5).

    Balancing the O(t) terms of the equation with f0 = t + b0 t^3 gives
    (6 + 2 k0) r3 = 4 k0 b0 (v^3 - v); the compact factors cancel at this
    order.  The identity map (v = 1) and the flat cone (b0 = 0) both give
    r3 = 0, as they must.
    """
    b0 = metric.f0_cubic_jet()
    return 2.0 * metric.k0 * b0 * v * (v * v - 1.0) / (3.0 + metric.k0)


def ivp_solve(
    metric: WarpedMetric,
    v: float,
    t_end: float,
    tol: float = 1e-11,
    delta: float = 1e-4,
    escape: float = 1e3,
    max_steps: int = 2_000_000,
) -> TimeTrajectory:
    """Solve the singular IVP r(0) = 0, r'(0) = v up to t_end.

    The equation is started at t = delta from the cubic series
    r = v t + r3 t^3, which absorbs the 1/t singularity; halving delta moves
    r(t_end) by less than ~10 tol (tested).
    """
    if t_end <= 0.0:
        raise ValidationError("t_end must be positive")
    if not 1e-13 <= tol <= 1e-3:
        raise ValidationError(f"tol={tol} outside [1e-13, 1e-3]")
    if not 0.0 < delta < t_end:
        raise ValidationError("need 0 < delta < t_end")
    r3 = launch_coefficient(metric, v)
    r_d = v * delta + r3 * delta**3
    rp_d = v + 3.0 * r3 * delta**2

    ts, rs, rps, rpps, errs, status, nacc, nrej, hmin, hmaxu = dp45_second_order(
        metric.rhs, delta, r_d, rp_d, t_end, tol, 0.1, escape, max_steps
    )
    # prepend the analytic singular-orbit sample (r''(0) = 0 by the series)
    ts = np.concatenate([[0.0], ts])
    rs = np.concatenate([[0.0], rs])
    rps = np.concatenate([[v], rps])
    rpps = np.concatenate([[0.0], rpps])
    errs = np.concatenate([[0.0], errs])
    traj = TimeTrajectory(
        ts=ts,
        rs=rs,
        rps=rps,
        rpps=rpps,
        errs=errs,
        tol=tol,
        stats=StepStats(nacc, nrej, hmin, hmaxu),
        delta=delta,
        r3=r3,
    )
    if status == DIVERGED:
        raise Diverged(f"|r| exceeded {escape} at t={ts[-1]:.4f}", traj)
    if status == UNDERFLOW:
        raise StepUnderflow("adaptive step fell below 1e-14", traj)
    if status == STEPLIMIT:
        raise StepLimitExceeded(f"exceeded {max_steps} steps", traj)
    return traj


# ---------------------------------------------------------------------------
# Monotone extensions

def _quintic_step(u: float) -> float:
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _quintic_step_d(u: float) -> float:
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return 30.0 * u * u * (1.0 - u) * (1.0 - u)


class RProfile:
    """A profile r on [0, T]: the IVP solution up to eps, a scheme beyond.

    Supplies r, rdot and rddot as callables.  On [0, eps] rddot comes from
    the equation itself (r solves it there); past eps from the scheme's
    analytic form.  Past eps, r is the antiderivative of the slope function,
    tabulated once by per-cell Gauss-Kronrod quadrature on a fine grid and
    read back through cubic Hermite interpolation (error ~1e-12 at the grid
    resolution used, below the quadrature tolerance of the deformation).
    """

    _N_GRID = 2049

    def __init__(self, metric, base, eps, T, scheme_name, slope_fn, slope_d_fn, r_eps):
        self.metric = metric
        self.base = base
        self.eps = eps
        self.T = T
        self.scheme = scheme_name
        self._slope = slope_fn
        self._slope_d = slope_d_fn
        grid = np.linspace(eps, T, self._N_GRID)
        cum = np.empty(self._N_GRID)
        cum[0] = r_eps
        for i in range(self._N_GRID - 1):
            seg, _ = gk_quad(slope_fn, grid[i], grid[i + 1], abs_tol=1e-13, max_depth=8)
            cum[i + 1] = cum[i] + seg
        slopes = np.asarray([slope_fn(t) for t in grid])
        slopes_d = np.asarray([slope_d_fn(t) for t in grid])
        self._grid = grid
        self._cum = cum
        self._slopes = slopes
        self._slopes_d = slopes_d
        self.mu = float(np.min(np.abs(slopes)))
        self.monotone_sign = float(np.sign(slopes[0]))
        if self.mu <= 0.0 or np.any(np.sign(slopes) != self.monotone_sign):
            raise MonotonicityLost(
                f"extension scheme {scheme_name} lost strict monotonicity"
            )

    def _r_scalar(self, t: float) -> float:
        if t <= self.eps:
            return self.base.eval(t)[0]
        return hermite_eval_scalar(self._grid, self._cum, self._slopes, self._slopes_d, t)[0]

    def r(self, t):
        if np.isscalar(t):
            return self._r_scalar(float(t))
        return np.asarray([self._r_scalar(float(tt)) for tt in np.asarray(t, dtype=float)])

    def _rdot_scalar(self, t: float) -> float:
        if t <= self.eps:
            return self.base.eval(t)[1]
        return self._slope(t)

    def rdot(self, t):
        if np.isscalar(t):
            return self._rdot_scalar(float(t))
        return np.asarray([self._rdot_scalar(float(tt)) for tt in np.asarray(t, dtype=float)])

    def _rddot_scalar(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t <= self.eps:
            r, rp = self.base.eval(t)
            return self.metric.rhs(t, r, rp)
        return self._slope_d(t)

    def rddot(self, t):
        if np.isscalar(t):
            return self._rddot_scalar(float(t))
        return np.asarray([self._rddot_scalar(float(tt)) for tt in np.asarray(t, dtype=float)])


class ContinueODE:
    """Scheme (a): keep solving the equation; monotonicity checked after."""

    name = "continue_ode"

    def build(self, metric, base, eps, T, tol):
        r_eps, rp_eps = base.eval(eps)
        ts, rs, rps, rpps, errs, status, *_ = dp45_second_order(
            metric.rhs, eps, r_eps, rp_eps, T, tol, 0.1, 1e6, 2_000_000
        )
        if status != OK:
            raise MonotonicityLost(f"continuation failed with status {status}")
        cont = TimeTrajectory(
            ts=ts, rs=rs, rps=rps, rpps=rpps, errs=errs, tol=tol,
            stats=StepStats(0, 0, 0, 0),
        )
        if np.any(rps * np.sign(rp_eps) <= 0.0):
            raise MonotonicityLost("r' vanished before the horizon")

        def slope(t):
            return cont.eval(t)[1]

        def slope_d(t):
            r, rp = cont.eval(t)
            return metric.rhs(t, r, rp)

        return slope, slope_d, r_eps


class CubicBlend:
    """Scheme (b): Hermite-blended slope toward ``slope_factor * r'(eps)``.

    The realised slope is sigma * max(mu, sigma * blend), mu half the
    smaller of start and target slope, so strict monotonicity holds by
    construction while the join at eps stays C^2.
    """

    name = "cubic_blend"

    def __init__(self, slope_factor: float = 2.0, window: float = 1.0):
        if slope_factor <= 0.0:
            raise ValidationError("slope_factor must be positive")
        if window <= 0.0:
            raise ValidationError("window must be positive")
        self.slope_factor = slope_factor
        self.window = window

    def build(self, metric, base, eps, T, tol):
        r_eps, rp_eps = base.eval(eps)
        rdd_eps = metric.rhs(eps, r_eps, rp_eps)
        target = self.slope_factor * rp_eps
        sigma = math.copysign(1.0, rp_eps)
        mu = 0.5 * min(abs(rp_eps), abs(target))
        w = min(self.window, max(1e-6, T - eps))

        def raw(t):
            s = (t - eps) / w
            if s >= 1.0:
                return target
            return float(_hermite(rp_eps, rdd_eps * w, target, 0.0, s))

        def raw_d(t):
            s = (t - eps) / w
            if s >= 1.0:
                return 0.0
            return float(_hermite_d(rp_eps, rdd_eps * w, target, 0.0, s)) / w

        def slope(t):
            return sigma * max(mu, sigma * raw(t))

        def slope_d(t):
            return raw_d(t) if sigma * raw(t) > mu else 0.0

        return slope, slope_d, r_eps


def _hermite_d(y0, m0, y1, m1, s):
    s2 = s * s
    return (
        (6 * s2 - 6 * s) * y0
        + (3 * s2 - 4 * s + 1) * m0
        + (-6 * s2 + 6 * s) * y1
        + (3 * s2 - 2 * s) * m1
    )


class LinearRamp:
    """Scheme (c): ramp onto a constant slope through a smooth join window."""

    name = "linear"

    def __init__(self, window: float = 1.0, slope: Optional[float] = None):
        if window <= 0.0:
            raise ValidationError("window must be positive")
        self.window = window
        self.slope = slope

    def build(self, metric, base, eps, T, tol):
        r_eps, rp_eps = base.eval(eps)
        rdd_eps = metric.rhs(eps, r_eps, rp_eps)
        s_lin = self.slope if self.slope is not None else rp_eps
        if s_lin * rp_eps <= 0.0:
            raise ValidationError("linear slope must have the sign of r'(eps)")
        sigma = math.copysign(1.0, rp_eps)
        mu = 0.5 * min(abs(rp_eps), abs(s_lin))
        w = min(self.window, max(1e-6, T - eps))

        def raw(t):
            u = (t - eps) / w
            chi = _quintic_step(u)
            return (1.0 - chi) * (rp_eps + rdd_eps * (t - eps)) + chi * s_lin

        def raw_d(t):
            u = (t - eps) / w
            chi = _quintic_step(u)
            chid = _quintic_step_d(u) / w
            return (1.0 - chi) * rdd_eps + chid * (s_lin - rp_eps - rdd_eps * (t - eps))

        def slope(t):
            return sigma * max(mu, sigma * raw(t))

        def slope_d(t):
            return raw_d(t) if sigma * raw(t) > mu else 0.0

        return slope, slope_d, r_eps


class BumpDeviation:
    """ODE continuation plus a C-infinity-flat deviation starting at eps.

    All derivatives of the deviation vanish at eps, so every alpha_i stays
    smooth there (the generic schemes only guarantee a continuous alpha').
    ``scale`` is the fraction of the safe amplitude (half the minimum slope).
    """

    name = "ode_deviate"

    def __init__(self, scale: float = 0.5, width: float = 1.0):
        if not 0.0 < scale <= 1.0:
            raise ValidationError("scale must be in (0, 1]")
        if width <= 0.0:
            raise ValidationError("width must be positive")
        self.scale = scale
        self.width = width

    def build(self, metric, base, eps, T, tol):
        slope0, slope0_d, r_eps = ContinueODE().build(metric, base, eps, T, tol)
        probe = np.linspace(eps, T, 513)
        mu0 = min(abs(slope0(t)) for t in probe)
        sigma = math.copysign(1.0, slope0(eps + 1e-9))
        w = self.width
        # sup of d/dt exp(-w/u) is 4/(e^2 w); cap the amplitude at mu0/2
        amp = sigma * self.scale * 0.5 * mu0 * w * math.e**2 / 4.0

        def bump(u):
            return math.exp(-w / u) if u > 0.0 else 0.0

        def slope(t):
            u = t - eps
            return slope0(t) + amp * bump(u) * (w / (u * u)) if u > 0.0 else slope0(t)

        def slope_d(t):
            u = t - eps
            if u <= 0.0:
                return slope0_d(t)
            return slope0_d(t) + amp * bump(u) * (w * w / u**4 - 2.0 * w / u**3)

        return slope, slope_d, r_eps


SCHEMES = {
    "continue_ode": ContinueODE,
    "cubic_blend": CubicBlend,
    "linear": LinearRamp,
    "ode_deviate": BumpDeviation,
}


def extend_monotone(
    metric: WarpedMetric,
    base: TimeTrajectory,
    scheme,
    T: float,
    tol: float = 1e-11,
    rp_floor: float = 1e-8,
) -> RProfile:
    """Extend the IVP solution past its cut strictly monotonically.

    ``base`` covers [0, eps]; if r'(eps) vanishes the cut is shrunk to the
    largest abscissa where |r'| >= rp_floor (such a point exists for v != 0
    by smoothness).  The returned profile matches value and first two
    derivatives at the cut and has |r'| >= mu > 0 beyond it.
    """
    if isinstance(scheme, str):
        scheme = SCHEMES[scheme]()
    eps = base.t_end
    if T <= eps:
        raise ValidationError("horizon T must exceed eps")
    if abs(base.eval(eps)[1]) < rp_floor:
        idx = np.nonzero(np.abs(base.rps) >= rp_floor)[0]
        if len(idx) == 0 or base.ts[idx[-1]] <= 0.0:
            raise DerivativeVanishes(
                f"no cut with |r'| >= {rp_floor} exists below eps={eps}"
            )
        eps = float(base.ts[idx[-1]])
        base = base.restrict(eps)
    slope, slope_d, r_eps = scheme.build(metric, base, eps, T, tol)
    prof = RProfile(metric, base, eps, T, scheme.name, slope, slope_d, r_eps)
    _check_join(metric, prof)
    return prof


def _check_join(metric, prof, rel_tol=1e-7):
    eps = prof.eps
    r_b, rp_b = prof.base.eval(eps)
    rdd_b = metric.rhs(eps, r_b, rp_b)
    h = 1e-9
    rp_a = prof.rdot(eps + h)
    rdd_a = prof.rddot(eps + h)
    scale_p = max(1.0, abs(rp_b))
    scale_d = max(1.0, abs(rdd_b))
    if abs(rp_a - rp_b - rdd_b * h) > rel_tol * scale_p or (
        abs(rdd_a - rdd_b) > 1e-4 * scale_d + rel_tol
    ):
        raise JoinMismatch(
            f"extension is not C^2 at eps={eps}: "
            f"r' jump {abs(rp_a - rp_b):.2e}, r'' jump {abs(rdd_a - rdd_b):.2e}"
        )


# ---------------------------------------------------------------------------
# The conformal deformation

@dataclass(frozen=True)
class SplitPolicy:
    """How the total log-scaling A is distributed over the factors."""

    kind: str
    index: int = 0
    weights: Optional[tuple] = None

    @staticmethod
    def uniform():
        return SplitPolicy("uniform")

    @staticmethod
    def single(i: int):
        return SplitPolicy("single", index=i)

    @staticmethod
    def from_weights(ws: Sequence[float]):
        return SplitPolicy("weights", weights=tuple(float(w) for w in ws))

    def shares(self, dims: tuple) -> np.ndarray:
        """Per-factor alpha_i = shares[i] * A."""
        n = len(dims)
        if self.kind == "uniform":
            ktot = float(sum(dims))
            return np.full(n, 1.0 / ktot)
        if self.kind == "single":
            if not 0 <= self.index < n:
                raise ValidationError(f"component index {self.index} out of range")
            out = np.zeros(n)
            out[self.index] = 1.0 / dims[self.index]
            return out
        if self.kind == "weights":
            if self.weights is None or len(self.weights) != n:
                raise SplitWeightsInvalid(
                    f"need {n} weights, got {self.weights!r}"
                )
            if abs(sum(self.weights) - 1.0) > 1e-12:
                raise SplitWeightsInvalid(
                    f"weights sum to {sum(self.weights)!r}, expected 1"
                )
            return np.array([w / k for w, k in zip(self.weights, dims)])
        raise ValidationError(f"unknown split policy {self.kind!r}")


@dataclass(frozen=True)
class DeformationResult:
    """A(t) = sum k_i alpha_i(t) on a grid, its split, and the residual."""

    metric: WarpedMetric
    epsilon: float
    T: float
    t_grid: np.ndarray
    r_grid: np.ndarray
    rdot_grid: np.ndarray
    A_grid: np.ndarray
    split_policy: SplitPolicy
    alpha_i_grids: np.ndarray  # shape (n_factors, n_grid)
    residual_max: float
    sign_variant: str
    quad_error: float
    profile: RProfile

    def alpha_dot_total(self, t):
        """sum k_i alpha_i'(t): the deformation integrand (0 up to eps)."""
        scalar = np.isscalar(t)
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([
            0.0 if tt <= self.epsilon else deformation_integrand(
                self.metric, self.profile, tt, self.sign_variant
            )
            for tt in tq
        ])
        return float(out[0]) if scalar else out

    def to_csv(self, path):
        """Rows `t,r,rdot,A,alpha_0,...,alpha_m,residual` (17 digits)."""
        m = self.alpha_i_grids.shape[0]
        res = residual_array(self.metric, self.profile, self, self.t_grid)
        header = "t,r,rdot,A," + ",".join(f"alpha_{i}" for i in range(m)) + ",residual"
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header + "\n")
            for i in range(len(self.t_grid)):
                cols = [self.t_grid[i], self.r_grid[i], self.rdot_grid[i], self.A_grid[i]]
                cols += [self.alpha_i_grids[jj, i] for jj in range(m)]
                cols += [res[i]]
                fh.write(",".join(f"{c:.17g}" for c in cols) + "\n")


def deformation_integrand(metric, prof, t, sign_variant=SIGN_CORRECTED):
    """The integrand of the deformation: sum k_i alpha_i'(t).

    Solving the deformed harmonicity equation for sum k_i alpha_i' gives a
    plus sign on the force term; ``paper_literal`` selects the minus-sign
    variant for the discrimination check.
    """
    rp = prof.rdot(t)
    if abs(rp) < 1e-12:
        raise DerivativeVanishes(f"|r'(t)| < 1e-12 at t={t}")
    rdd = prof.rddot(t)
    r = prof.r(t)
    force = metric.force(t, r)
    sign = 1.0 if sign_variant == SIGN_CORRECTED else -1.0
    return -rdd / rp - metric.drift(t) + sign * force / rp


def compute_deformation(
    metric: WarpedMetric,
    prof: RProfile,
    eps: Optional[float] = None,
    split_policy: Optional[SplitPolicy] = None,
    n_grid: int = 513,
    quad_tol: float = 1e-11,
    sign_variant: str = SIGN_CORRECTED,
) -> DeformationResult:
    """Recover A(t) = integral of the deformation integrand from eps to t.

    A vanishes identically on [0, eps]; beyond, the cumulative adaptive
    Gauss-Kronrod quadrature keeps the absolute error below ``quad_tol``.
    alpha_i are assigned from A by the split policy, and the harmonicity
    residual of the deformed metric is evaluated on a 1000-point grid.
    """
    if eps is None:
        eps = prof.eps
    if abs(eps - prof.eps) > 1e-12:
        raise ValidationError("eps must match the profile's extension cut")
    if split_policy is None:
        split_policy = SplitPolicy.uniform()
    T = prof.T
    n_pre = max(3, int(n_grid * eps / T))
    pre = np.linspace(0.0, eps, n_pre, endpoint=False)
    post = np.linspace(eps, T, n_grid - n_pre)
    t_grid = np.concatenate([pre, post])

    def f(s):
        return deformation_integrand(metric, prof, s, sign_variant)

    A = np.zeros_like(t_grid)
    err_total = 0.0
    acc = 0.0
    cell_tol = quad_tol / max(1, len(post) - 1)
    for i in range(len(post) - 1):
        seg, err = gk_quad(f, post[i], post[i + 1], abs_tol=cell_tol)
        acc += seg
        err_total += err
        A[n_pre + 1 + i] = acc

    shares = split_policy.shares(metric.dims())
    alpha = np.outer(shares, A)
    if np.max(np.abs(shares @ np.array(metric.dims(), dtype=float) - 1.0)) > 1e-12:
        raise SplitWeightsInvalid("internal share normalisation failed")

    r_grid = prof.r(t_grid)
    rdot_grid = prof.rdot(t_grid)
    if np.min(np.abs(rdot_grid[t_grid >= eps])) < 1e-12:
        raise DerivativeVanishes("|r'| < 1e-12 on the extension grid")

    result = DeformationResult(
        metric=metric,
        epsilon=eps,
        T=T,
        t_grid=t_grid,
        r_grid=r_grid,
        rdot_grid=rdot_grid,
        A_grid=A,
        split_policy=split_policy,
        alpha_i_grids=alpha,
        residual_max=math.nan,
        sign_variant=sign_variant,
        quad_error=err_total,
        profile=prof,
    )
    res = verify_harmonicity(metric, prof, result, eps, T)
    return replace(result, residual_max=res)


def verify_harmonicity(
    metric: WarpedMetric,
    prof: RProfile,
    deformation: DeformationResult,
    eps: Optional[float] = None,
    T: Optional[float] = None,
    n: int = 1000,
) -> float:
    """sup over a grid of the deformed-harmonicity left-hand side.

    alpha_i' enters through the integrand itself (the exact derivative of
    the quadrature), never by numeric differentiation of A.  The residual
    certifies the algebra of the construction; with the wrong force-term
    sign it is O(1) on curved metrics.
    """
    if eps is None:
        eps = deformation.epsilon
    if T is None:
        T = deformation.T
    d0 = max(eps / 10.0, 1e-4)
    grid = np.linspace(d0, T, n)
    worst = 0.0
    for t in grid:
        r = prof.r(t)
        rp = prof.rdot(t)
        rdd = prof.rddot(t)
        adot = deformation.alpha_dot_total(t)
        res = rdd + (metric.drift(t) + adot) * rp - metric.force(t, r)
        worst = max(worst, abs(res))
    return worst


def residual_array(metric, prof, deformation, ts):
    out = np.zeros(len(ts))
    for i, t in enumerate(ts):
        if t <= 0.0:
            continue
        r = prof.r(t)
        rp = prof.rdot(t)
        rdd = prof.rddot(t)
        adot = deformation.alpha_dot_total(t)
        out[i] = rdd + (metric.drift(t) + adot) * rp - metric.force(t, r)
    return out


# ---------------------------------------------------------------------------
# Built-in metrics and the full pipeline

def builtin_metric(name: str) -> WarpedMetric:
    """The three documented test metrics."""
    if name == "flat_cone":
        return WarpedMetric(k0=2, components=())
    if name == "smoothed_factor":
        return WarpedMetric(k0=2, components=(Component(3, 1.0, SmoothedCone(1.0)),))
    if name == "two_factor":
        # the collar scale is kept gentle so that the force term stays
        # O(10^2) over the default horizon (sinh(2r/a) growth)
        return WarpedMetric(
            k0=3,
            components=(
                Component(3, 1.0, SmoothedCone(1.0)),
                Component(2, 4.0, CoshCollar(4.0)),
            ),
        )
    raise ValidationError(f"unknown builtin metric {name!r}")


def deform_pipeline(
    metric: WarpedMetric,
    v: float,
    eps: float = 0.5,
    scheme="cubic_blend",
    T: float = 10.0,
    split_policy: Optional[SplitPolicy] = None,
    tol: float = 1e-11,
    sign_variant: str = SIGN_CORRECTED,
) -> DeformationResult:
    """ivp_solve -> extend_monotone -> compute_deformation in one call."""
    base = ivp_solve(metric, v, eps, tol=tol)
    prof = extend_monotone(metric, base, scheme, T, tol=tol)
    return compute_deformation(
        metric, prof, split_policy=split_policy, sign_variant=sign_variant
    )
