"""Action parameters and shooting state.

A cohomogeneity-one sphere action is described by the number g of distinct
principal curvatures and the two multiplicities (m0, m1).  Admissible
triples follow Muenzner's classification; the symmetric case m0 == m1 only
allows g in {1, 2, 3, 4, 6}.
"""

import math
from dataclasses import dataclass, field

from .errors import ValidationError

_SYMMETRIC_G = (1, 2, 3, 4, 6)


def is_admissible(g: int, m0: int, m1: int) -> bool:
    """Check (g, m0, m1) against the classification, up to swapping m0, m1."""
    if g < 1 or m0 < 1 or m1 < 1:
        return False
    lo, hi = sorted((m0, m1))
    if lo == hi:
        if g in (1, 2):
            return True
        if g == 3:
            return lo in (1, 2, 4, 8)
        if g == 4:
            return (lo, hi) in ((1, 1), (2, 2))
        if g == 6:
            return lo in (1, 2)
        return False
    if g == 2:
        return True
    if g == 4:
        # (4, m0, 1) for any m0, plus the sporadic unequal pairs
        if lo == 1:
            return True
        if lo == 2 and hi >= 3 and hi % 2 == 1:      # (4, 2, 2l+1)
            return True
        if lo == 4 and hi >= 7 and (hi - 3) % 4 == 0:  # (4, 4, 4l+3)
            return True
        return (lo, hi) in ((4, 5), (6, 9))
    return False


@dataclass(frozen=True)
class ActionParams:
    """Multiplicity data (g, m0, m1) of a cohomogeneity-one sphere action.

    ``formal=True`` bypasses the classification check.  This is used for the
    doubled-g relabeling onto special orthogonal groups, where the boundary
    value machinery runs with g replaced by 2g even though the doubled triple
    need not be a sphere action.
    """

    g: int
    m0: int
    m1: int = None  # type: ignore[assignment]
    formal: bool = False

    def __post_init__(self):
        if self.m1 is None:
            object.__setattr__(self, "m1", self.m0)
        for name in ("g", "m0", "m1"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"{name} must be an integer, got {v!r}")
        if self.g < 1 or self.m0 < 1 or self.m1 < 1:
            raise ValidationError(
                f"need g, m0, m1 >= 1, got ({self.g}, {self.m0}, {self.m1})"
            )
        if not self.formal:
            if self.m0 == self.m1:
                if self.g not in _SYMMETRIC_G:
                    raise ValidationError(
                        f"g={self.g} with m0==m1 is not admissible; "
                        f"g must be one of {_SYMMETRIC_G}"
                    )
            elif not is_admissible(self.g, self.m0, self.m1):
                raise ValidationError(
                    f"({self.g}, {self.m0}, {self.m1}) is not an admissible triple"
                )

    @property
    def symmetric(self) -> bool:
        return self.m0 == self.m1

    @property
    def m(self) -> int:
        if not self.symmetric:
            raise ValidationError("m is only defined when m0 == m1")
        return self.m0

    def require_symmetric(self, what: str = "this operation"):
        if not self.symmetric:
            raise ValidationError(f"{what} requires m0 == m1")
        return self


@dataclass(frozen=True)
class State:
    """Shooting state (x, r, r') in the logarithmic coordinate."""

    x: float
    r: float
    rp: float

    def __post_init__(self):
        for name in ("x", "r", "rp"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValidationError(f"state field {name} must be finite, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class SymmetryPoint:
    """Centre P_j = (0, y_j) with y_j = (j*g+1)*pi/(2g) of the point symmetry."""

    g: int
    j: int
    y: float = field(init=False)

    def __post_init__(self):
        if self.g < 1:
            raise ValidationError("g must be >= 1")
        object.__setattr__(self, "y", (self.j * self.g + 1) * math.pi / (2 * self.g))


def y_center(g: int, j: int) -> float:
    """Symmetry value y_j = (j*g+1)*pi/(2g)."""
    return (j * g + 1) * math.pi / (2 * g)
