"""Exception types raised across the solver pipeline."""


class HarmapError(Exception):
    """Base class for all library errors."""


class ValidationError(HarmapError):
    """Invalid parameters or preconditions."""


class StepUnderflow(HarmapError):
    """Adaptive step size fell below 1e-14; carries the partial trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepLimitExceeded(HarmapError):
    """Integration exceeded the step budget; carries the partial trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class InsufficientRange(HarmapError):
    """Trajectory does not reach the abscissa required by a tail estimate."""


class NoSignChange(HarmapError):
    """Bracket endpoints do not straddle a sign change of L(v)."""


class SeedNotNegative(HarmapError):
    """No seed velocity with L(v) < 0 was found."""


class NotASolution(HarmapError):
    """Candidate velocity failed the lattice certification."""


class AsymmetricDomain(HarmapError):
    """Trajectory does not cover a symmetric interval [-X, X]."""


class ProfileSingular(HarmapError):
    """A warping profile became non-positive along the integration path."""


class Diverged(HarmapError):
    """Solution exceeded the escape bound; carries the partial trajectory."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class MonotonicityLost(HarmapError):
    """ODE continuation lost strict monotonicity before the horizon."""


class JoinMismatch(HarmapError):
    """Extension failed to match value and derivatives at the junction."""


class DerivativeVanishes(HarmapError):
    """|r'(t)| dropped below threshold where the deformation needs 1/r'."""


class SplitWeightsInvalid(HarmapError):
    """Component split weights do not sum to one."""


class ConfigError(HarmapError):
    """Malformed metric configuration file."""
