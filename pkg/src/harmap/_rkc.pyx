# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) kernel for the symmetric sphere equation.

Twin of harmap._rk.integrate_x_ode: same tableau, same PI controller, same
acceptance rule, with the right-hand side inlined in C.
"""

import numpy as np

from libc.math cimport atan, exp, fabs, sin, sqrt, tanh

DEF PI = 3.141592653589793238462643383279502884

cdef inline double _profile_a(double g, double x) noexcept nogil:
    if x > 0.0:
        return (2.0 / g) * (0.5 * PI - atan(exp(-x)))
    return (2.0 / g) * atan(exp(x))

cdef inline double _rhs(double g, double m, double x, double r, double rp) noexcept nogil:
    cdef double a = _profile_a(g, x)
    return (m - 1.0) * tanh(x) * rp + (m / (2.0 * g)) * (
        (g - 1.0) * sin(2.0 * r - 2.0 * a) + sin(2.0 * r + 2.0 * (g - 1.0) * a)
    )


def integrate_x_ode(int g, int m, double x0, double r0, double rp0,
                    double x1, double tol, double hmax, double escape,
                    long max_steps):
    cdef double A21 = 1.0 / 5.0
    cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
    cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
    cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
    cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
    cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0
    cdef double A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
    cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
    cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
    cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
    cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
    cdef double SAFETY = 0.9, MIN_FACTOR = 0.2, MAX_FACTOR = 5.0
    cdef double ALPHA = 0.7 / 5.0, BETA = 0.4 / 5.0, H_FLOOR = 1e-14

    cdef double gg = <double> g, mm = <double> m
    cdef double direction = 1.0 if x1 >= x0 else -1.0
    cdef Py_ssize_t cap = 1024, n = 0
    xs_a = np.empty(cap); rs_a = np.empty(cap); rps_a = np.empty(cap)
    rpps_a = np.empty(cap); errs_a = np.empty(cap)
    cdef double[:] xs = xs_a, rs = rs_a, rps = rps_a, rpps = rpps_a, errs = errs_a

    cdef double x = x0, r = r0, rp = rp0
    cdef double k1r = rp
    cdef double k1p = _rhs(gg, mm, x, r, rp)
    cdef int status = 0
    cdef long n_accept = 0, n_reject = 0, steps = 0
    cdef double h_min_used = -1.0, h_max_used = 0.0
    cdef double err_prev = 1e-4
    cdef double h = hmax if hmax < 1e-2 else 1e-2
    cdef double hd, x2, r2, p2, k2r, k2p, x3, r3, p3, k3r, k3p
    cdef double x4, r4, p4, k4r, k4p, x5, r5, p5, k5r, k5p
    cdef double x6, r6, p6, k6r, k6p, x_new, r_new, p_new, k7r, k7p
    cdef double er, ep, sc_r, sc_p, err, fac, m1, m2

    xs[0] = x; rs[0] = r; rps[0] = rp; rpps[0] = k1p; errs[0] = 0.0
    n = 1

    if x0 == x1:
        return (xs_a[:n].copy(), rs_a[:n].copy(), rps_a[:n].copy(),
                rpps_a[:n].copy(), errs_a[:n].copy(), 0, 0, 0, 0.0, 0.0)

    while True:
        if steps >= max_steps:
            status = 3
            break
        if h < H_FLOOR:
            status = 2
            break
        if (x + direction * h - x1) * direction > 0.0:
            h = fabs(x1 - x)
        steps += 1
        hd = direction * h

        x2 = x + 0.2 * hd
        r2 = r + hd * A21 * k1r
        p2 = rp + hd * A21 * k1p
        k2r = p2; k2p = _rhs(gg, mm, x2, r2, p2)

        x3 = x + 0.3 * hd
        r3 = r + hd * (A31 * k1r + A32 * k2r)
        p3 = rp + hd * (A31 * k1p + A32 * k2p)
        k3r = p3; k3p = _rhs(gg, mm, x3, r3, p3)

        x4 = x + 0.8 * hd
        r4 = r + hd * (A41 * k1r + A42 * k2r + A43 * k3r)
        p4 = rp + hd * (A41 * k1p + A42 * k2p + A43 * k3p)
        k4r = p4; k4p = _rhs(gg, mm, x4, r4, p4)

        x5 = x + (8.0 / 9.0) * hd
        r5 = r + hd * (A51 * k1r + A52 * k2r + A53 * k3r + A54 * k4r)
        p5 = rp + hd * (A51 * k1p + A52 * k2p + A53 * k3p + A54 * k4p)
        k5r = p5; k5p = _rhs(gg, mm, x5, r5, p5)

        x6 = x + hd
        r6 = r + hd * (A61 * k1r + A62 * k2r + A63 * k3r + A64 * k4r + A65 * k5r)
        p6 = rp + hd * (A61 * k1p + A62 * k2p + A63 * k3p + A64 * k4p + A65 * k5p)
        k6r = p6; k6p = _rhs(gg, mm, x6, r6, p6)

        r_new = r + hd * (B1 * k1r + B3 * k3r + B4 * k4r + B5 * k5r + B6 * k6r)
        p_new = rp + hd * (B1 * k1p + B3 * k3p + B4 * k4p + B5 * k5p + B6 * k6p)
        x_new = x + hd
        k7r = p_new; k7p = _rhs(gg, mm, x_new, r_new, p_new)

        er = hd * (E1 * k1r + E3 * k3r + E4 * k4r + E5 * k5r + E6 * k6r + E7 * k7r)
        ep = hd * (E1 * k1p + E3 * k3p + E4 * k4p + E5 * k5p + E6 * k6p + E7 * k7p)
        m1 = fabs(r) if fabs(r) > fabs(r_new) else fabs(r_new)
        m2 = fabs(rp) if fabs(rp) > fabs(p_new) else fabs(p_new)
        sc_r = tol + tol * m1
        sc_p = tol + tol * m2
        err = sqrt(0.5 * ((er / sc_r) * (er / sc_r) + (ep / sc_p) * (ep / sc_p)))

        if err <= 1.0:
            n_accept += 1
            if h_min_used < 0.0 or h < h_min_used:
                h_min_used = h
            if h > h_max_used:
                h_max_used = h
            x = x_new; r = r_new; rp = p_new
            k1r = k7r; k1p = k7p
            if n == cap:
                cap *= 2
                xs_a = np.resize(xs_a, cap); rs_a = np.resize(rs_a, cap)
                rps_a = np.resize(rps_a, cap); rpps_a = np.resize(rpps_a, cap)
                errs_a = np.resize(errs_a, cap)
                xs = xs_a; rs = rs_a; rps = rps_a; rpps = rpps_a; errs = errs_a
            xs[n] = x; rs[n] = r; rps[n] = rp; rpps[n] = k1p; errs[n] = err
            n += 1
            if fabs(r) > escape:
                status = 1
                break
            if x == x1 or (x - x1) * direction >= 0.0:
                break
            if err > 0.0:
                fac = SAFETY * err ** (-ALPHA) * err_prev ** BETA
            else:
                fac = MAX_FACTOR
            if fac > MAX_FACTOR:
                fac = MAX_FACTOR
            elif fac < MIN_FACTOR:
                fac = MIN_FACTOR
            h = h * fac
            if h > hmax:
                h = hmax
            err_prev = err if err > 1e-4 else 1e-4
        else:
            n_reject += 1
            fac = SAFETY * err ** (-ALPHA) * err_prev ** BETA
            if fac > 1.0:
                fac = 1.0
            elif fac < MIN_FACTOR:
                fac = MIN_FACTOR
            h = h * fac

    if h_min_used < 0.0:
        h_min_used = 0.0
    return (xs_a[:n].copy(), rs_a[:n].copy(), rps_a[:n].copy(),
            rpps_a[:n].copy(), errs_a[:n].copy(), status, n_accept, n_reject,
            h_min_used, h_max_used)
