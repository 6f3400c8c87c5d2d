"""Shooting from the symmetry points and Lyapunov classification.

Trajectories start at x = 0 with r(0) = y_j = (j g + 1) pi / (2g) and
r'(0) = v.  The sign of L(v) = W_v(-inf) splits the velocity axis into a
bounded-oscillatory band (l_j, u_j) and divergent outside; the band edges
are the critical velocities at which the shot solves a symmetric boundary
value problem.  Bisection on the sign of L locates them.

Certification of a solution reads r's limits off a plateau window of the
trajectory: past the plateau the saddle at the tail amplifies velocity and
integration error like e^|x|, so the farthest samples say nothing about r
even though they still pin W to ~1e-12 (W is quadratically flat there).
"""

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import ode
from .errors import (
    AsymmetricDomain,
    NoSignChange,
    NotASolution,
    SeedNotNegative,
    ValidationError,
)
from .integrate import (
    MINUS_INF,
    PLUS_INF,
    FINITE,
    LimitEstimate,
    RLimit,
    Trajectory,
    estimate_w_limit,
    integrate,
    limit_of_r,
    merge_two_sided,
)
from .params import ActionParams, State, y_center

BVP_SOLUTION = "bvp_solution"
BOUNDED_OSCILLATORY = "bounded_oscillatory"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

DEFAULT_SHOOT_TOL = 1e-12
DEFAULT_PRECISION = 1e-9
LATTICE_TOL = 1e-4
DEFAULT_SYM_WINDOW = 12.0

# Plateau ladder for reading r limits: fractions (a, b) of the one-sided
# range; the first window on which limit_of_r reports a finite limit wins.
_PLATEAU_LADDER = (
    (0.0, 1.0),
    (0.2, 0.95),
    (0.33, 0.89),
    (0.42, 0.84),
    (0.47, 0.8),
    (0.52, 0.82),
)

_PAPER_J = (-2, -1, 0, 1)


@dataclass(frozen=True)
class Behavior:
    kind: str
    k_plus: Optional[int] = None
    k_minus: Optional[int] = None

    def __str__(self):
        if self.kind == BVP_SOLUTION:
            return f"{self.kind}(k_plus={self.k_plus}, k_minus={self.k_minus})"
        return self.kind


@dataclass(frozen=True)
class ShootOutcome:
    params: ActionParams
    j: int
    v: float
    traj: Trajectory
    L_minus: Optional[LimitEstimate]
    W_plus: Optional[LimitEstimate]
    r_limit_minus: RLimit
    r_limit_plus: RLimit
    behavior: Behavior
    precision: float
    lattice_window_minus: Optional[tuple] = None
    lattice_window_plus: Optional[tuple] = None


def _plateau_limit(traj: Trajectory, direction: int, x_extent: float):
    """limit_of_r over the plateau ladder; returns (RLimit, window).

    The full range is tried first; when it is inconclusive the ladder slides
    the window onto the plateau, where the finite-limit test is meaningful.
    The non-finite classification of the full range is kept otherwise.
    """
    full = None
    for fa, fb in _PLATEAU_LADDER:
        lo = fa * x_extent
        hi = fb * x_extent
        if direction == MINUS_INF:
            lo, hi = -hi, -lo
        try:
            sub = traj.restrict(lo, hi)
        except ValidationError:
            continue
        rl = limit_of_r(sub, direction)
        if rl.finite:
            return rl, (lo, hi)
        if full is None:
            full = rl
    if full is None:
        raise ValidationError("trajectory too short for limit classification")
    return full, None


def shoot(
    p: ActionParams,
    j: int,
    v: float,
    precision: float = DEFAULT_PRECISION,
    tol: float = DEFAULT_SHOOT_TOL,
    hmax: float = 0.25,
    escape: float = 1e3,
    x_extra: float = 0.0,
) -> ShootOutcome:
    """Two-sided shot from (0, y_j, v) with Lyapunov classification.

    Integrates both directions to the tail-bound abscissa (plus ``x_extra``
    if more range is wanted, e.g. to observe slow oscillation), estimates
    W(-inf) and W(+inf), and classifies the behaviour.
    """
    p.require_symmetric("shoot")
    if j not in _PAPER_J:
        warnings.warn(
            f"j={j} is outside the range explored in the tables (j in {_PAPER_J})",
            RuntimeWarning,
            stacklevel=2,
        )
    x_cut = ode.tail_abscissa(p.g, precision)
    if p.m > 1:
        x_cut = max(x_cut, 25.1)
    X = x_cut + x_extra
    s0 = State(0.0, y_center(p.g, j), v)
    left = integrate(p, s0, -X, tol=tol, escape=escape, hmax=hmax)
    right = integrate(p, s0, +X, tol=tol, escape=escape, hmax=hmax)
    traj = merge_two_sided(left, right)

    L_minus = W_plus = None
    if not left.diverged:
        L_minus = estimate_w_limit(traj, MINUS_INF, precision)
    if not right.diverged:
        W_plus = estimate_w_limit(traj, PLUS_INF, precision)

    rl_minus, win_minus = _plateau_limit(traj, MINUS_INF, abs(left.x_min))
    rl_plus, win_plus = _plateau_limit(traj, PLUS_INF, right.x_max)

    outcome = ShootOutcome(
        params=p,
        j=j,
        v=v,
        traj=traj,
        L_minus=L_minus,
        W_plus=W_plus,
        r_limit_minus=rl_minus,
        r_limit_plus=rl_plus,
        behavior=Behavior(INCONCLUSIVE),
        precision=precision,
        lattice_window_minus=win_minus,
        lattice_window_plus=win_plus,
    )
    return replace(outcome, behavior=classify(outcome))


def classify(o: ShootOutcome) -> Behavior:
    """Behaviour from the limit data alone (re-derivable, exposed for tests).

    Sign rule on L with the certified tail bound as threshold; a candidate
    solution is confirmed by finite r-limits on the lattice at both ends.
    """
    if o.traj.diverged:
        return Behavior(DIVERGENT)
    if o.L_minus is None:
        return Behavior(INCONCLUSIVE)
    threshold = o.L_minus.tail_bound
    if not math.isfinite(threshold):  # m > 1 carries no certified bound
        threshold = o.precision
    L = o.L_minus.value
    if L < -threshold:
        return Behavior(BOUNDED_OSCILLATORY)
    if L > threshold:
        return Behavior(DIVERGENT)
    if (
        o.r_limit_minus.finite
        and o.r_limit_plus.finite
        and o.r_limit_minus.lattice_distance < LATTICE_TOL
        and o.r_limit_plus.lattice_distance < LATTICE_TOL
    ):
        return Behavior(
            BVP_SOLUTION,
            k_plus=o.r_limit_plus.lattice_k,
            k_minus=o.r_limit_minus.lattice_k,
        )
    return Behavior(INCONCLUSIVE)


def lyapunov_limit(
    p: ActionParams,
    j: int,
    v: float,
    precision: float = 1e-10,
    tol: float = DEFAULT_SHOOT_TOL,
    escape: float = 1e3,
) -> LimitEstimate:
    """L(v) = W_v(-inf) from a one-sided shot (the bisection workhorse)."""
    p.require_symmetric("lyapunov_limit")
    X = ode.tail_abscissa(p.g, precision)
    if p.m > 1:
        X = max(X, 25.1)
    s0 = State(0.0, y_center(p.g, j), v)
    traj = integrate(p, s0, -X, tol=tol, escape=escape, hmax=1.0)
    return estimate_w_limit(traj, MINUS_INF, precision)


@dataclass(frozen=True)
class CriticalVelocities:
    g: int
    m: int
    j: int
    l: float
    u: float
    bracket_width: float
    L_at_l: float
    L_at_u: float
    L_at_midpoint: float
    paper_explored: bool = True


def _bisect_root(L_eval, v_neg, v_pos, tol):
    """Bisect sign(L) between a negative-L and a positive-L velocity."""
    lo, hi = v_neg, v_pos
    width = abs(hi - lo)
    while width > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if L_eval(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        width = abs(hi - lo)
    return 0.5 * (lo + hi), width


def find_critical_velocities(
    p: ActionParams,
    j: int,
    search: Optional[tuple] = None,
    tol: float = 1e-9,
    precision: float = 1e-10,
    itol: float = DEFAULT_SHOOT_TOL,
) -> CriticalVelocities:
    """Bisect L's sign changes for both edges l_j < u_j of the negative band.

    ``search`` is (v_lo, v_hi, v_seed); any entry may be None.  The seed must
    satisfy L(seed) < 0.  Defaults: for odd j the centre v = 0 works for the
    tabulated actions; for even j a small negative velocity is swept in
    {-0.02 * 2^i} until L < 0.
    """
    p.require_symmetric("find_critical_velocities")
    v_lo, v_hi, v_seed = search if search is not None else (None, None, None)
    if v_lo is None:
        v_lo = -2.5
    if v_hi is None:
        v_hi = 2.5

    def L(v):
        return lyapunov_limit(p, j, v, precision=precision, tol=itol).value

    if v_seed is None:
        if j % 2 != 0:
            v_seed = 0.0
            if L(v_seed) >= 0.0:
                raise SeedNotNegative(
                    f"L(0) >= 0 for j={j}; provide an explicit seed"
                )
        else:
            v_seed = None
            for i in range(12):
                cand = -0.02 * 2**i
                if cand <= v_lo:
                    break
                if L(cand) < 0.0:
                    v_seed = cand
                    break
            if v_seed is None:
                raise SeedNotNegative(
                    f"epsilon sweep found no L < 0 seed for j={j}"
                )
    elif L(v_seed) >= 0.0:
        raise SeedNotNegative(f"L({v_seed}) >= 0")

    L_hi = L(v_hi)
    if L_hi <= 0.0:
        raise NoSignChange(f"L({v_hi}) = {L_hi} <= 0, bracket does not straddle")
    L_lo = L(v_lo)
    if L_lo <= 0.0:
        raise NoSignChange(f"L({v_lo}) = {L_lo} <= 0, bracket does not straddle")

    u, wu = _bisect_root(L, v_seed, v_hi, tol)
    l, wl = _bisect_root(L, v_seed, v_lo, tol)
    if not l < u:
        raise ValidationError(f"bisection produced l={l} >= u={u}")
    L_mid = L(0.5 * (l + u))
    if L_mid >= 0.0:
        raise ValidationError(
            f"L at the midpoint of (l, u) is {L_mid} >= 0; roots not trusted"
        )
    return CriticalVelocities(
        g=p.g,
        m=p.m,
        j=j,
        l=l,
        u=u,
        bracket_width=max(wl, wu),
        L_at_l=L(l),
        L_at_u=L(u),
        L_at_midpoint=L_mid,
        paper_explored=j in _PAPER_J,
    )


def certify_critical_velocity(
    p: ActionParams,
    j: int,
    v: float,
    tol: float,
    precision: float = 1e-10,
    itol: float = DEFAULT_SHOOT_TOL,
):
    """Check |L(v)| <= 2 (tail_bound + tol * Lipschitz), Lipschitz by divided
    differences of L around v.  Returns (ok, |L|, bound)."""
    est = lyapunov_limit(p, j, v, precision=precision, tol=itol)
    delta = max(tol, 1e-6)
    Lp = lyapunov_limit(p, j, v + delta, precision=precision, tol=itol).value
    Lm = lyapunov_limit(p, j, v - delta, precision=precision, tol=itol).value
    lips = abs(Lp - Lm) / (2.0 * delta)
    tail = est.tail_bound if math.isfinite(est.tail_bound) else precision
    bound = 2.0 * (tail + tol * lips)
    return abs(est.value) <= bound, abs(est.value), bound


def _refine_to_flow(
    p: ActionParams, j: int, v: float, X: float, tol: float, hmax: float
) -> float:
    """Re-zero a critical velocity against one specific discrete flow.

    A velocity bisected under one integrator configuration misses the zero
    of another configuration's computed L by the cross-flow noise (~1e-13),
    which the tail saddle amplifies by e^|x|.  Bisecting again in a tiny
    bracket around the seed, with exactly the stepping used for the
    certification shot, removes that offset.  If no sign change exists
    within +-1e-5 the seed is returned unchanged (certification will then
    judge it on its own merits).
    """
    s = State(0.0, y_center(p.g, j), 0.0)

    def L(vv):
        traj = integrate(p, State(s.x, s.r, vv), -X, tol=tol, hmax=hmax)
        if traj.diverged:
            return math.inf
        end = traj.state_at_end(MINUS_INF)
        return ode.lyapunov_w_raw(p.g, p.m, end.x, end.r, end.rp)

    Lv = L(v)
    if Lv == 0.0:
        return v
    delta = 1e-12 * max(1.0, abs(v))
    lo = hi = None
    while delta <= 1e-5:
        if (L(v - delta) < 0.0) != (Lv < 0.0):
            lo, hi = v - delta, v
            break
        if (L(v + delta) < 0.0) != (Lv < 0.0):
            lo, hi = v, v + delta
            break
        delta *= 8.0
    if lo is None:
        return v
    neg, pos = (lo, hi) if L(lo) < 0.0 else (hi, lo)
    for _ in range(60):
        mid = 0.5 * (neg + pos)
        if mid == neg or mid == pos:
            break
        if L(mid) < 0.0:
            neg = mid
        else:
            pos = mid
    return 0.5 * (neg + pos)


@dataclass(frozen=True)
class SolutionRecord:
    """A certified symmetric-BVP solution and its induced k-BVP data."""

    params: ActionParams
    j: int
    v: float
    k: int
    j_pp: int
    c_minus: float
    c_plus: float
    lattice_distance_minus: float
    lattice_distance_plus: float
    L_minus: LimitEstimate
    W_plus: LimitEstimate
    jump: float
    jump_reference: float
    defect: float
    sym_window: float
    traj: Trajectory
    lattice_window_minus: Optional[tuple] = None
    lattice_window_plus: Optional[tuple] = None

    def sidecar(self) -> dict:
        """JSON-ready summary written next to exported trajectories."""
        return {
            "g": self.params.g,
            "m": self.params.m,
            "j": self.j,
            "v": self.v,
            "k": self.k,
            "L": self.L_minus.value,
            "tail_bound": self.L_minus.tail_bound,
            "defect": self.defect,
            "jump": self.jump,
            "jump_reference": self.jump_reference,
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
        }


def solve_symmetric_bvp(
    p: ActionParams,
    j: int,
    v_critical: float,
    tol: float = DEFAULT_SHOOT_TOL,
    precision: float = DEFAULT_PRECISION,
    lattice_tol: float = LATTICE_TOL,
    sym_window: float = DEFAULT_SYM_WINDOW,
    hmax: float = 0.05,
) -> SolutionRecord:
    """Certify a critical velocity as a symmetric-BVP solution.

    Checks, in order: |L| below the certified tail bound, finite r-limits on
    the lattice at both ends (within ``lattice_tol``), the -inf limit on the
    pi sub-lattice, and the consistency of the +inf limit with point
    symmetry.  The induced label of the plain boundary value problem is
    k = (2 j'' - j) g + 1 where j'' = j - c_minus / pi.

    ``hmax`` is small here so that the cubic Hermite dense output stays
    below the 1e-8 defect budget of the point-symmetry check; ``sym_window``
    limits that check to |x| <= 12 where two independently integrated sides
    are still comparable (beyond, e^|x| error growth dominates any defect).

    The velocity is first re-zeroed against this routine's own integrator
    configuration (see _refine_to_flow); the refined value is the one
    recorded in the returned SolutionRecord.
    """
    X = ode.tail_abscissa(p.g, precision)
    v_critical = _refine_to_flow(p, j, v_critical, X, tol, hmax)
    o = shoot(p, j, v_critical, precision=precision, tol=tol, hmax=hmax)
    threshold = o.L_minus.tail_bound if o.L_minus is not None else 0.0
    if o.L_minus is None or abs(o.L_minus.value) > threshold:
        raise NotASolution(
            f"|L| = {abs(o.L_minus.value) if o.L_minus else math.inf:.3e} "
            f"exceeds the certification threshold {threshold:.3e}"
        )
    if not (o.r_limit_minus.finite and o.r_limit_plus.finite):
        raise NotASolution(
            f"r-limits not finite: -inf {o.r_limit_minus.kind}, "
            f"+inf {o.r_limit_plus.kind}"
        )
    if (
        o.r_limit_minus.lattice_distance > lattice_tol
        or o.r_limit_plus.lattice_distance > lattice_tol
    ):
        raise NotASolution("lattice distance exceeds tolerance")
    c_minus = o.r_limit_minus.value
    k_minus_pi = round(c_minus / math.pi)
    if abs(c_minus - k_minus_pi * math.pi) > lattice_tol:
        raise NotASolution(
            f"-inf limit {c_minus:.6f} is not on the pi sub-lattice"
        )
    j_pp = j - k_minus_pi
    k = (2 * j_pp - j) * p.g + 1
    c_plus = o.r_limit_plus.value
    expected_plus = 2.0 * y_center(p.g, j) - k_minus_pi * math.pi
    if abs(c_plus - expected_plus) > 2.0 * lattice_tol:
        raise NotASolution(
            f"+inf limit {c_plus:.6f} inconsistent with point symmetry "
            f"(expected {expected_plus:.6f})"
        )
    defect = verify_point_symmetry(o.traj, j, window=sym_window)
    return SolutionRecord(
        params=p,
        j=j,
        v=v_critical,
        k=k,
        j_pp=j_pp,
        c_minus=c_minus,
        c_plus=c_plus,
        lattice_distance_minus=o.r_limit_minus.lattice_distance,
        lattice_distance_plus=o.r_limit_plus.lattice_distance,
        L_minus=o.L_minus,
        W_plus=o.W_plus,
        jump=o.W_plus.value - o.L_minus.value,
        jump_reference=ode.w_jump_constant(p.g),
        defect=defect,
        sym_window=min(sym_window, o.traj.x_max, -o.traj.x_min),
        traj=o.traj,
        lattice_window_minus=o.lattice_window_minus,
        lattice_window_plus=o.lattice_window_plus,
    )


def reflect(traj: Trajectory, j: int) -> Trajectory:
    """The reflected trajectory x -> 2 y_j - r(-x), which solves the same ODE."""
    span = traj.x_max - traj.x_min
    if abs(traj.x_max + traj.x_min) > 1e-9 * max(1.0, span):
        raise AsymmetricDomain(
            f"trajectory covers [{traj.x_min:.3f}, {traj.x_max:.3f}], "
            "reflection needs a symmetric interval"
        )
    y = y_center(traj.params.g, j)
    return replace(
        traj,
        xs=np.ascontiguousarray(-traj.xs[::-1]),
        rs=np.ascontiguousarray(2.0 * y - traj.rs[::-1]),
        rps=np.ascontiguousarray(traj.rps[::-1]),
        rpps=np.ascontiguousarray(-traj.rpps[::-1]),
        errs=np.ascontiguousarray(traj.errs[::-1]),
        diverged_at=-traj.diverged_at if traj.diverged_at is not None else None,
        x_anchor=-traj.x_anchor,
    )


def verify_point_symmetry(
    traj: Trajectory, j: int, tol: float = None, window: float = None, n: int = 801
) -> float:
    """sup |r(x) + r(-x) - 2 y_j| over a symmetric grid of shared abscissae.

    Returns the defect; if ``tol`` is given, additionally raises
    NotASolution when the defect exceeds it.
    """
    X = min(traj.x_max, -traj.x_min)
    if X <= 0.0:
        raise AsymmetricDomain("trajectory does not cover both sides of 0")
    if window is not None:
        X = min(X, window)
    y = y_center(traj.params.g, j)
    grid = np.linspace(0.0, X, n)
    r_pos, _ = traj.eval(grid)
    r_neg, _ = traj.eval(-grid)
    defect = float(np.max(np.abs(r_pos + r_neg - 2.0 * y)))
    if tol is not None and defect > tol:
        raise NotASolution(f"point-symmetry defect {defect:.3e} > {tol:.3e}")
    return defect


def to_k_solution(sol: SolutionRecord, j_pp: Optional[int] = None) -> SolutionRecord:
    """Shift a symmetric solution by (j'' - j') pi onto its plain-k form.

    The equation is invariant under shifts by integer multiples of pi, so
    the samples stay a solution; the shifted record has r(-inf) = 0 and the
    recorded target index k = (2 j'' - j') g + 1.
    """
    if j_pp is None:
        j_pp = sol.j_pp
    if j_pp != sol.j_pp:
        raise ValidationError(
            f"j''={j_pp} does not match the solution's measured value {sol.j_pp}"
        )
    shift = (j_pp - sol.j) * math.pi
    traj = replace(sol.traj, rs=sol.traj.rs + shift)
    j_new = 2 * j_pp - sol.j
    return replace(
        sol,
        traj=traj,
        j=j_new,
        j_pp=j_new,
        c_minus=sol.c_minus + shift,
        c_plus=sol.c_plus + shift,
    )


def so_group_relabel(p: ActionParams) -> ActionParams:
    """Double g: the same machinery then solves the boundary value problem
    realised on the special orthogonal group lift of the action."""
    from .params import is_admissible

    formal = not is_admissible(2 * p.g, p.m0, p.m1)
    return ActionParams(2 * p.g, p.m0, p.m1, formal=formal)
