"""Adaptive integration of the x-form equation and tail-limit estimation.

The equation has saddle structure at both ends of the x axis: perturbations
grow like e^|x| toward the tails, so the raw samples far out carry amplified
integration error.  The Lyapunov value W is insensitive to this (the product
of the decaying and the growing mode stays small), which is why W limits are
estimated at the full tail abscissa while r limits are best read off a
plateau window; see limit_of_r and shooting.shoot.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import backend, ode
from .errors import (
    Diverged,
    InsufficientRange,
    StepLimitExceeded,
    StepUnderflow,
    ValidationError,
)
from .params import ActionParams, State

PLUS_INF = 1
MINUS_INF = -1

DEFAULT_TOL = 1e-10
DEFAULT_ESCAPE = 1e3
DEFAULT_HMAX = 0.5
MAX_STEPS = 2_000_000

# Richardson abscissae for the (uncertified) m > 1 limit estimate.
RICHARDSON_XCUTS = (15.0, 20.0, 25.0)


@dataclass(frozen=True)
class StepStats:
    accepted: int
    rejected: int
    h_min: float
    h_max: float

    def merged(self, other: "StepStats") -> "StepStats":
        return StepStats(
            self.accepted + other.accepted,
            self.rejected + other.rejected,
            min(self.h_min, other.h_min) if self.accepted and other.accepted
            else max(self.h_min, other.h_min),
            max(self.h_max, other.h_max),
        )


@dataclass(frozen=True)
class Trajectory:
    """Dense numerical solution samples, sorted by strictly increasing x."""

    params: ActionParams
    xs: np.ndarray
    rs: np.ndarray
    rps: np.ndarray
    rpps: np.ndarray
    errs: np.ndarray
    tol: float
    stats: StepStats
    diverged: bool = False
    diverged_at: Optional[float] = None
    x_anchor: float = 0.0  # initial abscissa of the underlying shot

    @property
    def x_min(self) -> float:
        return float(self.xs[0])

    @property
    def x_max(self) -> float:
        return float(self.xs[-1])

    def __len__(self) -> int:
        return len(self.xs)

    def state_at_end(self, direction: int) -> State:
        i = -1 if direction == PLUS_INF else 0
        return State(float(self.xs[i]), float(self.rs[i]), float(self.rps[i]))

    def eval(self, x):
        """Cubic Hermite dense output; returns (r, r') arrays or scalars."""
        if np.isscalar(x):
            return hermite_eval_scalar(
                self.xs, self.rs, self.rps, self.rpps, float(x)
            )
        xq = np.asarray(x, dtype=float)
        if xq.min() < self.x_min - 1e-12 or xq.max() > self.x_max + 1e-12:
            raise ValidationError("dense evaluation outside the sample range")
        idx = np.clip(np.searchsorted(self.xs, xq, side="right") - 1, 0, len(self.xs) - 2)
        h = self.xs[idx + 1] - self.xs[idx]
        s = np.clip((xq - self.xs[idx]) / h, 0.0, 1.0)
        r = _hermite(self.rs[idx], self.rps[idx] * h, self.rs[idx + 1], self.rps[idx + 1] * h, s)
        rp = _hermite(self.rps[idx], self.rpps[idx] * h, self.rps[idx + 1], self.rpps[idx + 1] * h, s)
        return r, rp

    def w_values(self) -> np.ndarray:
        p = self.params
        return ode.w_array(p.g, p.m, self.xs, self.rs, self.rps)

    def restrict(self, lo: float, hi: float) -> "Trajectory":
        """Sub-trajectory of samples with lo <= x <= hi."""
        if hi <= lo:
            raise ValidationError("restrict needs lo < hi")
        mask = (self.xs >= lo - 1e-12) & (self.xs <= hi + 1e-12)
        if mask.sum() < 4:
            raise ValidationError("restriction keeps too few samples")
        div = self.diverged and self.diverged_at is not None and lo <= self.diverged_at <= hi
        return replace(
            self,
            xs=self.xs[mask],
            rs=self.rs[mask],
            rps=self.rps[mask],
            rpps=self.rpps[mask],
            errs=self.errs[mask],
            diverged=div,
        )

    def to_csv(self, path) -> None:
        """Write `x,r,rp,W` rows with 17 significant digits."""
        w = self.w_values()
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("x,r,rp,W\n")
            for i in range(len(self.xs)):
                fh.write(
                    f"{self.xs[i]:.17g},{self.rs[i]:.17g},"
                    f"{self.rps[i]:.17g},{w[i]:.17g}\n"
                )


def _hermite(y0, m0, y1, m1, s):
    # m0, m1 are derivatives already scaled by the step width
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * m0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * m1
    )


def hermite_eval_scalar(ts, ys, yps, ypps, t):
    """Scalar cubic Hermite for (y, y') sample arrays, avoiding array overhead."""
    n = len(ts)
    if t < ts[0] - 1e-12 or t > ts[n - 1] + 1e-12:
        raise ValidationError("dense evaluation outside the sample range")
    i = int(np.searchsorted(ts, t, side="right")) - 1
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    t0 = float(ts[i])
    h = float(ts[i + 1]) - t0
    s = (t - t0) / h
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    s2 = s * s
    s3 = s2 * s
    a = 2 * s3 - 3 * s2 + 1
    b = s3 - 2 * s2 + s
    c = -2 * s3 + 3 * s2
    d = s3 - s2
    y = (
        a * float(ys[i])
        + b * float(yps[i]) * h
        + c * float(ys[i + 1])
        + d * float(yps[i + 1]) * h
    )
    yp = (
        a * float(yps[i])
        + b * float(ypps[i]) * h
        + c * float(yps[i + 1])
        + d * float(ypps[i + 1]) * h
    )
    return y, yp


def integrate(
    p: ActionParams,
    s0: State,
    x_target: float,
    tol: float = DEFAULT_TOL,
    escape: float = DEFAULT_ESCAPE,
    hmax: float = DEFAULT_HMAX,
    max_steps: int = MAX_STEPS,
) -> Trajectory:
    """Integrate the symmetric equation from s0 to x_target (either direction).

    Divergence (|r| > escape) is not an error: the returned trajectory is
    truncated and carries the diverged marker.  A step underflow raises
    StepUnderflow with the partial trajectory attached.
    """
    p.require_symmetric("integrate")
    if not 1e-13 <= tol <= 1e-3:
        raise ValidationError(f"tol={tol} outside [1e-13, 1e-3]")
    if abs(x_target - s0.x) > 100.0:
        raise ValidationError("integration range limited to |x_target - s0.x| <= 100")
    if hmax <= 0.0:
        raise ValidationError("hmax must be positive")
    xs, rs, rps, rpps, errs, status, nacc, nrej, hmin, hmaxu = backend.integrate_x_ode(
        p.g, p.m, s0.x, s0.r, s0.rp, x_target, tol, hmax, escape, max_steps
    )
    diverged = status == 1
    diverged_at = float(xs[-1]) if diverged else None
    if xs[0] > xs[-1]:  # store ascending
        xs, rs, rps, rpps, errs = xs[::-1], rs[::-1], rps[::-1], rpps[::-1], errs[::-1]
    traj = Trajectory(
        params=p,
        xs=np.ascontiguousarray(xs),
        rs=np.ascontiguousarray(rs),
        rps=np.ascontiguousarray(rps),
        rpps=np.ascontiguousarray(rpps),
        errs=np.ascontiguousarray(errs),
        tol=tol,
        stats=StepStats(nacc, nrej, hmin, hmaxu),
        diverged=diverged,
        diverged_at=diverged_at,
        x_anchor=s0.x,
    )
    if status == 2:
        raise StepUnderflow("adaptive step fell below 1e-14", traj)
    if status == 3:
        raise StepLimitExceeded(f"exceeded {max_steps} steps", traj)
    return traj


def merge_two_sided(left: Trajectory, right: Trajectory) -> Trajectory:
    """Join a backward and a forward shot from the same initial state."""
    if left.params != right.params:
        raise ValidationError("trajectories have different parameters")
    if left.x_max != right.x_min:
        raise ValidationError("trajectories do not share their junction sample")
    return Trajectory(
        params=left.params,
        xs=np.concatenate([left.xs[:-1], right.xs]),
        rs=np.concatenate([left.rs[:-1], right.rs]),
        rps=np.concatenate([left.rps[:-1], right.rps]),
        rpps=np.concatenate([left.rpps[:-1], right.rpps]),
        errs=np.concatenate([left.errs[:-1], right.errs]),
        tol=max(left.tol, right.tol),
        stats=left.stats.merged(right.stats),
        diverged=left.diverged or right.diverged,
        diverged_at=left.diverged_at if left.diverged else right.diverged_at,
        x_anchor=left.x_max,
    )


@dataclass(frozen=True)
class LimitEstimate:
    """A tail value with an analytic truncation bound (m=1 only)."""

    value: float
    tail_bound: float
    x_cut: float


def _direction_sign(direction) -> int:
    if direction in (PLUS_INF, MINUS_INF):
        return direction
    if direction == math.inf or direction == "+inf":
        return PLUS_INF
    if direction == -math.inf or direction == "-inf":
        return MINUS_INF
    raise ValidationError(f"direction must be +-1 or +-inf, got {direction!r}")


def estimate_w_limit(traj: Trajectory, direction, precision: float = 1e-9) -> LimitEstimate:
    """Estimate W(+-inf) from the tail of a trajectory.

    For m = 1 the result carries the analytic bound 8(g-1)/g^2 e^(-x_cut) on
    the truncation error.  For m > 1 no such bound exists; the value is an
    Aitken extrapolation over W at |x| = 15, 20, 25 and tail_bound is inf.
    """
    d = _direction_sign(direction)
    p = traj.params
    g, m = p.g, p.m
    if m == 1:
        x_req = ode.tail_abscissa(g, precision)
        end = traj.state_at_end(d)
        if d * end.x < x_req:
            raise InsufficientRange(
                f"trajectory ends at x={end.x:.3f}, need |x| >= {x_req:.3f}"
            )
        value = ode.lyapunov_w_raw(g, m, end.x, end.r, end.rp)
        x_cut = abs(end.x)
        return LimitEstimate(value=value, tail_bound=ode.w_tail_bound(g, x_cut), x_cut=x_cut)
    # m > 1: uncertified Richardson estimate
    end = traj.state_at_end(d)
    if d * end.x < RICHARDSON_XCUTS[-1]:
        raise InsufficientRange(
            f"m>1 estimate needs |x| >= {RICHARDSON_XCUTS[-1]}, trajectory ends at {end.x:.3f}"
        )
    ws = []
    for xc in RICHARDSON_XCUTS:
        r, rp = traj.eval(d * xc)
        ws.append(ode.lyapunov_w_raw(g, m, d * xc, r, rp))
    d1, d2 = ws[1] - ws[0], ws[2] - ws[1]
    denom = d1 - d2
    value = ws[2] + (d2 * d2 / denom if abs(denom) > 1e-300 else 0.0)
    return LimitEstimate(value=value, tail_bound=math.inf, x_cut=RICHARDSON_XCUTS[-1])


FINITE = "finite"
OSCILLATORY = "oscillatory"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

FINITE_WINDOW = 1e-6       # width of the plateau window accepted as a limit
MIN_SIGN_CHANGES = 3       # r' sign changes in the tail quarter => oscillatory
GROWTH_THRESHOLD = 4 * math.pi


@dataclass(frozen=True)
class RLimit:
    """Classification of r at one end of a trajectory."""

    kind: str
    value: Optional[float] = None
    lattice_k: Optional[int] = None
    lattice_value: Optional[float] = None
    lattice_distance: Optional[float] = None
    sign: Optional[int] = None
    sign_changes: int = 0

    @property
    def finite(self) -> bool:
        return self.kind == FINITE


def nearest_lattice(g: int, c: float, direction) -> tuple[int, float]:
    """Nearest admissible limit: k pi/2 + pi/g at +inf, k pi/2 at -inf."""
    d = _direction_sign(direction)
    off = math.pi / g if d == PLUS_INF else 0.0
    k = round((c - off) / (0.5 * math.pi))
    return k, k * 0.5 * math.pi + off


def limit_of_r(traj: Trajectory, direction) -> RLimit:
    """Classify the behaviour of r toward one end of the given trajectory.

    The tests operate on the last quarter of the trajectory's own range, so
    the caller controls the window by restricting the trajectory (important:
    near-saddle error growth makes the farthest samples of a long shot the
    least reliable place to read off r itself).
    """
    d = _direction_sign(direction)
    span = traj.x_max - traj.x_min
    if span <= 0.0:
        raise ValidationError("degenerate trajectory")
    if d == PLUS_INF:
        tail = traj.xs >= traj.x_max - 0.25 * span
        end_r = float(traj.rs[-1])
        inner_r = float(traj.rs[0])
    else:
        tail = traj.xs <= traj.x_min + 0.25 * span
        end_r = float(traj.rs[0])
        inner_r = float(traj.rs[-1])
    rq = traj.rs[tail]
    rpq = traj.rps[tail]
    sign_changes = int(np.sum(np.diff(np.sign(rpq)) != 0))

    if traj.diverged and traj.diverged_at is not None:
        mid = 0.5 * (traj.x_min + traj.x_max)
        if (d == PLUS_INF) == (traj.diverged_at >= mid):
            return RLimit(kind=DIVERGENT, sign=int(math.copysign(1.0, end_r)),
                          sign_changes=sign_changes)

    width = float(rq.max() - rq.min())
    if width <= FINITE_WINDOW:
        c = 0.5 * float(rq.max() + rq.min())
        k, lattice = nearest_lattice(traj.params.g, c, d)
        return RLimit(
            kind=FINITE,
            value=c,
            lattice_k=k,
            lattice_value=lattice,
            lattice_distance=abs(c - lattice),
            sign_changes=sign_changes,
        )

    grew = abs(end_r - inner_r) > GROWTH_THRESHOLD
    monotone = sign_changes == 0 and abs(rq[-1] - rq[0]) > 0.0
    if grew and monotone:
        return RLimit(kind=DIVERGENT, sign=int(math.copysign(1.0, end_r - inner_r)),
                      sign_changes=sign_changes)

    if sign_changes >= MIN_SIGN_CHANGES:
        return RLimit(kind=OSCILLATORY, sign_changes=sign_changes)

    return RLimit(kind=INCONCLUSIVE, sign_changes=sign_changes)
