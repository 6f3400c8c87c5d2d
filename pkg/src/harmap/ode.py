"""Closed-form ingredients of the reduced harmonic-map ODE on spheres.

Everything here is a pure function of its arguments.  The logarithmic
coordinate x = log(tan(g t / 2)) maps the orbit interval (0, pi/g) to the
whole real line; the profile

    a(x) = (2/g) * arctan(e^x),        a'(x) = 1 / (g cosh x)

is the image of the identity map.  In x the symmetric (m0 == m1 == m)
equation reads

    r'' = (m-1) tanh(x) r' + (m/2g) [ (g-1) sin(2r - 2a) + sin(2r + 2(g-1)a) ]

which, expanded in sin(2r), cos(2r), has coefficients

    h1(x) = (g-1) cos 2a + cos 2(g-1)a,
    h2(x) = -(g-1) sin 2a + sin 2(g-1)a.

The Lyapunov function used to classify shooting trajectories is

    W = r'^2/2 - (m/2g) [ h1 sin^2 r + h2 sin^2(r - 3pi/4) ].
"""

import math
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .params import ActionParams, State

PI = math.pi


def profile_a(g: int, x: float) -> float:
    """a(x) = (2/g) arctan(e^x), evaluated overflow-free for any finite x."""
    if x > 0.0:
        return (2.0 / g) * (0.5 * PI - math.atan(math.exp(-x)))
    return (2.0 / g) * math.atan(math.exp(x))


def profile_a_prime(g: int, x: float) -> float:
    """a'(x) = 1/(g cosh x) via the overflow-free sech form."""
    e = math.exp(-abs(x))
    return (2.0 / g) * e / (1.0 + e * e)


def coeff_h(g: int, x: float):
    """Return (h1, h2, h1', h2') at x; derivatives by the chain rule."""
    a = profile_a(g, x)
    ap = profile_a_prime(g, x)
    s2, c2 = math.sin(2.0 * a), math.cos(2.0 * a)
    sg, cg = math.sin(2.0 * (g - 1) * a), math.cos(2.0 * (g - 1) * a)
    h1 = (g - 1) * c2 + cg
    h2 = -(g - 1) * s2 + sg
    h1p = -2.0 * (g - 1) * ap * (s2 + sg)
    h2p = 2.0 * (g - 1) * ap * (-c2 + cg)
    return h1, h2, h1p, h2p


def rhs_x_raw(g: int, m: int, x: float, r: float, rp: float) -> float:
    """r'' of the symmetric equation in x (direct two-sine form)."""
    a = profile_a(g, x)
    return (m - 1) * math.tanh(x) * rp + (m / (2.0 * g)) * (
        (g - 1) * math.sin(2.0 * r - 2.0 * a) + math.sin(2.0 * r + 2.0 * (g - 1) * a)
    )


def rhs_x(p: ActionParams, s: State) -> float:
    """r'' at a state, for symmetric actions."""
    p.require_symmetric("rhs_x")
    return rhs_x_raw(p.g, p.m, s.x, s.r, s.rp)


def rhs_x_hform(p: ActionParams, s: State) -> float:
    """r'' in the equivalent sin(2r) h1 + cos(2r) h2 form (for cross-checks)."""
    p.require_symmetric("rhs_x_hform")
    h1, h2, _, _ = coeff_h(p.g, s.x)
    return (p.m - 1) * math.tanh(s.x) * s.rp + (p.m / (2.0 * p.g)) * (
        math.sin(2.0 * s.r) * h1 + math.cos(2.0 * s.r) * h2
    )


def rhs_t(p: ActionParams, t: float, r: float, rp: float) -> float:
    """d2r/dt2 of the general (m0, m1) equation on the open interval (0, pi/g).

    Solved from

        0 = 4 sin^2(gt) r'' + (g(m0+m1) sin 2gt + 2g(m0-m1) sin gt) r'
            - g(g-2) sin 2(r-t) (m0+m1 + (m0-m1) cos gt)
            - 2g sin(2(r-t)+gt) ((m0+m1) cos gt + m0-m1).

    The equation is singular at the endpoints; this evaluator exists for
    residual checks only and raises outside the open interval.
    """
    g, m0, m1 = p.g, p.m0, p.m1
    if not 0.0 < t < PI / g:
        raise ValidationError(f"t={t} outside the open interval (0, pi/{g})")
    sp, sm = m0 + m1, m0 - m1
    sgt, cgt = math.sin(g * t), math.cos(g * t)
    s2gt = 2.0 * sgt * cgt
    num = (
        g * (g - 2) * math.sin(2.0 * (r - t)) * (sp + sm * cgt)
        + 2.0 * g * math.sin(2.0 * (r - t) + g * t) * (sp * cgt + sm)
        - (g * sp * s2gt + 2.0 * g * sm * sgt) * rp
    )
    return num / (4.0 * sgt * sgt)


def lyapunov_w_raw(g: int, m: int, x: float, r: float, rp: float) -> float:
    h1, h2, _, _ = coeff_h(g, x)
    sr = math.sin(r)
    sq = math.sin(r - 0.75 * PI)
    return 0.5 * rp * rp - (m / (2.0 * g)) * (h1 * sr * sr + h2 * sq * sq)


def lyapunov_w(p: ActionParams, s: State) -> float:
    """The Lyapunov function W at a state."""
    p.require_symmetric("lyapunov_w")
    return lyapunov_w_raw(p.g, p.m, s.x, s.r, s.rp)


def lyapunov_w_prime_raw(g: int, m: int, x: float, r: float, rp: float) -> float:
    a = profile_a(g, x)
    sech = g * profile_a_prime(g, x)  # 1/cosh x
    s2, c2 = math.sin(2.0 * a), math.cos(2.0 * a)
    sg, cg = math.sin(2.0 * (g - 1) * a), math.cos(2.0 * (g - 1) * a)
    sr = math.sin(r)
    sq = math.sin(r - 0.75 * PI)
    coef = m * (g - 1) / (g * g) * sech
    return (
        (m - 1) * math.tanh(x) * rp * rp
        + coef * (s2 + sg) * sr * sr
        - coef * (-c2 + cg) * sq * sq
    )


def lyapunov_w_prime(p: ActionParams, s: State) -> float:
    """dW/dx along solutions (the ODE already substituted)."""
    p.require_symmetric("lyapunov_w_prime")
    return lyapunov_w_prime_raw(p.g, p.m, s.x, s.r, s.rp)


def lyapunov_w_prime_hform(p: ActionParams, s: State) -> float:
    """Equivalent form (m-1) tanh x r'^2 - (1/2g)(h1' sin^2 r + h2' sin^2(r-3pi/4)) * m."""
    p.require_symmetric("lyapunov_w_prime_hform")
    _, _, h1p, h2p = coeff_h(p.g, s.x)
    sr = math.sin(s.r)
    sq = math.sin(s.r - 0.75 * PI)
    return (p.m - 1) * math.tanh(s.x) * s.rp * s.rp - (p.m / (2.0 * p.g)) * (
        h1p * sr * sr + h2p * sq * sq
    )


def t_from_x(g: int, x: float) -> float:
    """Inverse coordinate change; coincides with the profile a(x)."""
    return profile_a(g, x)


def x_from_t(g: int, t: float) -> float:
    """x = log(tan(g t / 2)) for t in the open interval (0, pi/g)."""
    if not 0.0 < t < PI / g:
        raise ValidationError(f"t={t} outside the open interval (0, pi/{g})")
    return math.log(math.tan(0.5 * g * t))


def w_prime_bound(g: int, x: float) -> float:
    """Envelope 4(g-1)/(g^2 cosh x) dominating |W'| for m = 1."""
    e = math.exp(-abs(x))
    sech = 2.0 * e / (1.0 + e * e)
    return 4.0 * (g - 1) / (g * g) * sech


def w_tail_bound(g: int, x_cut: float) -> float:
    """Bound 8(g-1)/g^2 e^(-x_cut) on |W(x_cut) - W(+-inf)| for m = 1.

    Integrating the |W'| envelope over a tail gives
    4(g-1)/g^2 * 2 arctan(e^(-x_cut)) <= 8(g-1)/g^2 * e^(-x_cut).
    """
    return 8.0 * (g - 1) / (g * g) * math.exp(-x_cut)


def tail_abscissa(g: int, precision: float) -> float:
    """Smallest |x| at which the m=1 tail bound drops below ``precision``."""
    if precision <= 0.0:
        raise ValidationError("precision must be positive")
    coef = 8.0 * (g - 1) / (g * g)
    if coef == 0.0:  # g == 1: W is constant, any abscissa certifies
        return 1.0
    return max(1.0, math.log(coef / precision))


def w_jump_constant(g: int) -> float:
    """W(+inf) - W(-inf) along certified solutions.

    Closed form (1 - cos(2pi/g) + sin(2pi/g))/4, which evaluates to
    (3+sqrt(3))/8 for g=3, 1/2 for g=4 and (1+sqrt(3))/8 for g=6.
    """
    return 0.25 * (1.0 - math.cos(2.0 * PI / g) + math.sin(2.0 * PI / g))


@lru_cache(maxsize=None)
def h1_zero(g: int = 3) -> float:
    """Unique positive zero z0 of h1 (exists for g = 3), by bisection."""
    if g != 3:
        raise ValidationError("h1 has a unique positive zero only for g = 3")
    lo, hi = 0.0, 5.0
    flo = coeff_h(g, lo)[0]
    if not coeff_h(g, hi)[0] < 0.0 < flo:
        raise ValidationError("bisection bracket failed for h1 zero")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if coeff_h(g, mid)[0] > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def h1_prime_zero(g: int = 6) -> float:
    """Location x0 > 0 of the interior minimum of h1 (exists for g = 6)."""
    if g != 6:
        raise ValidationError("h1 has an interior minimum only for g = 6")
    lo, hi = 0.1, 5.0
    if not coeff_h(g, lo)[2] < 0.0 < coeff_h(g, hi)[2]:
        raise ValidationError("bisection bracket failed for h1' zero")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if coeff_h(g, mid)[2] < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# Vectorised variants for trajectory post-processing.

def a_array(g: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    at = np.arctan(e)
    return np.where(x > 0.0, (2.0 / g) * (0.5 * PI - at), (2.0 / g) * at)


def h_arrays(g: int, x: np.ndarray):
    a = a_array(g, x)
    h1 = (g - 1) * np.cos(2.0 * a) + np.cos(2.0 * (g - 1) * a)
    h2 = -(g - 1) * np.sin(2.0 * a) + np.sin(2.0 * (g - 1) * a)
    return h1, h2


def w_array(g: int, m: int, x: np.ndarray, r: np.ndarray, rp: np.ndarray) -> np.ndarray:
    h1, h2 = h_arrays(g, np.asarray(x, dtype=float))
    sr = np.sin(r)
    sq = np.sin(r - 0.75 * PI)
    return 0.5 * rp * rp - (m / (2.0 * g)) * (h1 * sr * sr + h2 * sq * sq)
