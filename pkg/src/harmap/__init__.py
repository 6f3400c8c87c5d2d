"""Equivariant harmonic map solver.

Two pipelines:

* shooting on the reduced sphere equation in the logarithmic coordinate,
  classified by the sign of the Lyapunov limit L(v) = W_v(-inf), with
  bisection for the critical velocities and symmetric-BVP certification;
* construction of harmonic self-maps of non-compact warped products by a
  conformal deformation of the domain metric obtained by quadrature.

The integration core runs on a compiled kernel when available; see
harmap.backend.backend_name().
"""

from .backend import backend_name
from .errors import (
    AsymmetricDomain,
    ConfigError,
    DerivativeVanishes,
    Diverged,
    HarmapError,
    InsufficientRange,
    JoinMismatch,
    MonotonicityLost,
    NoSignChange,
    NotASolution,
    ProfileSingular,
    SplitWeightsInvalid,
    StepLimitExceeded,
    StepUnderflow,
    ValidationError,
)
from .params import ActionParams, State, SymmetryPoint, y_center

__version__ = "0.1.0"

__all__ = [
    "ActionParams",
    "State",
    "SymmetryPoint",
    "y_center",
    "backend_name",
    "HarmapError",
    "ValidationError",
    "StepUnderflow",
    "StepLimitExceeded",
    "InsufficientRange",
    "NoSignChange",
    "NotASolution",
    "SeedNotNegative",
    "AsymmetricDomain",
    "ProfileSingular",
    "Diverged",
    "MonotonicityLost",
    "JoinMismatch",
    "DerivativeVanishes",
    "SplitWeightsInvalid",
    "ConfigError",
    "__version__",
]

from .errors import SeedNotNegative  # noqa: E402  (placed for __all__ order)
