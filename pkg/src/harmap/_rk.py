"""Pure-Python Dormand-Prince 5(4) core for second-order scalar ODEs.

This is the fallback lane; harmap._rkc is the compiled twin with identical
stepping logic (same tableau, same PI controller, same acceptance rule).
The state is (r, r') and the right-hand side supplies r''.

Status codes returned by the loop:
    0  reached the target abscissa
    1  diverged (|r| exceeded the escape bound)
    2  step underflow (|h| < 1e-14)
    3  step budget exhausted
"""

import math

import numpy as np

from .ode import rhs_x_raw

OK, DIVERGED, UNDERFLOW, STEPLIMIT = 0, 1, 2, 3

# Dormand-Prince 5(4) tableau (FSAL: the 7th stage is the next k1).
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ALPHA = 0.7 / 5.0  # PI controller exponents
_BETA = 0.4 / 5.0
_H_FLOOR = 1e-14


def dp45_second_order(rhs2, x0, r0, rp0, x1, tol, hmax, escape, max_steps):
    """Integrate r'' = rhs2(x, r, r') from x0 to x1 adaptively.

    Returns (xs, rs, rps, rpps, errs, status, n_accept, n_reject,
    h_min, h_max_used).  ``errs`` holds the normalised local error estimate
    (<= 1 for every accepted step); ``rpps`` the right-hand side at the nodes.
    """
    direction = 1.0 if x1 >= x0 else -1.0
    xs = [x0]
    rs = [r0]
    rps = [rp0]
    errs = [0.0]
    x, r, rp = x0, r0, rp0
    k1r = rp
    k1p = rhs2(x, r, rp)
    rpps = [k1p]
    status = OK
    n_accept = 0
    n_reject = 0
    h_min_used = math.inf
    h_max_used = 0.0
    err_prev = 1e-4
    h = min(hmax, 1e-2)
    steps = 0
    if x0 == x1:
        return _pack(xs, rs, rps, rpps, errs, status, 0, 0, 0.0, 0.0)
    while True:
        if steps >= max_steps:
            status = STEPLIMIT
            break
        if h < _H_FLOOR:
            status = UNDERFLOW
            break
        if (x + direction * h - x1) * direction > 0.0:
            h = abs(x1 - x)
        steps += 1
        hd = direction * h

        x2 = x + 0.2 * hd
        r2 = r + hd * _A21 * k1r
        p2 = rp + hd * _A21 * k1p
        k2r, k2p = p2, rhs2(x2, r2, p2)

        x3 = x + 0.3 * hd
        r3 = r + hd * (_A31 * k1r + _A32 * k2r)
        p3 = rp + hd * (_A31 * k1p + _A32 * k2p)
        k3r, k3p = p3, rhs2(x3, r3, p3)

        x4 = x + 0.8 * hd
        r4 = r + hd * (_A41 * k1r + _A42 * k2r + _A43 * k3r)
        p4 = rp + hd * (_A41 * k1p + _A42 * k2p + _A43 * k3p)
        k4r, k4p = p4, rhs2(x4, r4, p4)

        x5 = x + (8.0 / 9.0) * hd
        r5 = r + hd * (_A51 * k1r + _A52 * k2r + _A53 * k3r + _A54 * k4r)
        p5 = rp + hd * (_A51 * k1p + _A52 * k2p + _A53 * k3p + _A54 * k4p)
        k5r, k5p = p5, rhs2(x5, r5, p5)

        x6 = x + hd
        r6 = r + hd * (_A61 * k1r + _A62 * k2r + _A63 * k3r + _A64 * k4r + _A65 * k5r)
        p6 = rp + hd * (_A61 * k1p + _A62 * k2p + _A63 * k3p + _A64 * k4p + _A65 * k5p)
        k6r, k6p = p6, rhs2(x6, r6, p6)

        r_new = r + hd * (_B1 * k1r + _B3 * k3r + _B4 * k4r + _B5 * k5r + _B6 * k6r)
        p_new = rp + hd * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
        x_new = x + hd
        k7r, k7p = p_new, rhs2(x_new, r_new, p_new)

        er = hd * (_E1 * k1r + _E3 * k3r + _E4 * k4r + _E5 * k5r + _E6 * k6r + _E7 * k7r)
        ep = hd * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p)
        sc_r = tol + tol * max(abs(r), abs(r_new))
        sc_p = tol + tol * max(abs(rp), abs(p_new))
        err = math.sqrt(0.5 * ((er / sc_r) ** 2 + (ep / sc_p) ** 2))

        if err <= 1.0:
            n_accept += 1
            h_min_used = min(h_min_used, h)
            h_max_used = max(h_max_used, h)
            x, r, rp = x_new, r_new, p_new
            k1r, k1p = k7r, k7p
            xs.append(x)
            rs.append(r)
            rps.append(rp)
            rpps.append(k1p)
            errs.append(err)
            if abs(r) > escape:
                status = DIVERGED
                break
            if x == x1 or (x - x1) * direction >= 0.0:
                break
            fac = _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA if err > 0.0 else _MAX_FACTOR
            h = h * min(_MAX_FACTOR, max(_MIN_FACTOR, fac))
            h = min(h, hmax)
            err_prev = max(err, 1e-4)
        else:
            n_reject += 1
            fac = _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA
            h = h * min(1.0, max(_MIN_FACTOR, fac))
    if h_min_used is math.inf:
        h_min_used = 0.0
    return _pack(xs, rs, rps, rpps, errs, status, n_accept, n_reject, h_min_used, h_max_used)


def _pack(xs, rs, rps, rpps, errs, status, n_accept, n_reject, h_min, h_max):
    return (
        np.asarray(xs, dtype=float),
        np.asarray(rs, dtype=float),
        np.asarray(rps, dtype=float),
        np.asarray(rpps, dtype=float),
        np.asarray(errs, dtype=float),
        status,
        n_accept,
        n_reject,
        h_min,
        h_max,
    )


def integrate_x_ode(g, m, x0, r0, rp0, x1, tol, hmax, escape, max_steps):
    """Specialisation to the symmetric sphere equation (fallback lane)."""

    def rhs2(x, r, rp):
        return rhs_x_raw(g, m, x, r, rp)

    return dp45_second_order(rhs2, x0, r0, rp0, x1, tol, hmax, escape, max_steps)
