"""Exception types shared across the package.

Solvers raise these instead of returning sentinel values, so callers
(and the CLI, which maps them to reason codes) can tell a physical
absence apart from a numerical failure.
"""


class BoseboundError(Exception):
    """Base class for all package errors."""


class ConfigError(BoseboundError):
    """Invalid or contradictory configuration input."""


class InBandEnergyError(BoseboundError):
    """Energy argument lies inside (or too close to) the bath band."""


class IllPosedBathError(BoseboundError):
    """Bath specification makes the requested quantity undefined."""


class NoBoundStateError(BoseboundError):
    """The requested bound state does not exist at these parameters."""


class BracketingError(BoseboundError):
    """Root finder could not bracket a sign change."""


class GridTooSmallError(BoseboundError):
    """Real-space grid cannot hold the state to the requested tail weight."""


class DegenerateModeError(BoseboundError):
    """Mode construction hit a degenerate or singular configuration."""


class OptimizerFailedError(BoseboundError):
    """Variational optimizer did not converge to a trustworthy minimum."""


class RegimeError(BoseboundError):
    """Requested operation is undefined in this parameter regime."""


class DimensionCapError(BoseboundError):
    """Many-body basis exceeds the configured size cap."""


class PoleHitError(BoseboundError):
    """Evaluation point collides with a pole of the requested function."""
