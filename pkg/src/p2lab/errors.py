"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class P2LabError(Exception):
    exit_code = 1


class ConfigError(P2LabError, ValueError):
    """Malformed configuration, unknown keys, or invalid arguments."""

    exit_code = 2


class InvalidArgumentError(ConfigError):
    """A function argument violates its precondition."""


class MeshFormatError(ConfigError):
    """Unparseable mesh file; message carries the offending line number."""


class MeshInvariantError(ConfigError):
    """A mesh violates a structural invariant; message names the violation."""


class InvalidWeightError(ConfigError):
    """A weight field produced a negative sample."""


class WeightsConditionError(P2LabError, ValueError):
    """The combined weight mass condition failed: the integral of the domain
    weight plus the integral of the boundary weight must be positive."""

    exit_code = 3


class ConstantsInsideSubspaceError(WeightsConditionError):
    """Constraint functional does not separate constants (c . 1 <= 0)."""


class DegenerateDirectionError(P2LabError, ValueError):
    """Rayleigh-quotient denominator vanished along the given direction."""


class DegenerateProblemError(P2LabError, ValueError):
    """Both weights vanish on the constrained subspace; no threshold exists."""


class InvalidDiscretizationError(P2LabError, RuntimeError):
    """Reduced stiffness is not positive definite (disconnected mesh?)."""


class NotInConeError(P2LabError, ValueError):
    """No Nehari point exists along the direction (quotient >= lambda)."""


class ConstantDirectionError(P2LabError, ValueError):
    """Direction has zero gradient energy; Nehari retraction undefined."""


class BelowThresholdError(P2LabError, ValueError):
    """Requested lambda is not above the spectral threshold."""

    exit_code = 4


class NonConvergenceError(P2LabError, RuntimeError):
    """Solver hit its iteration cap. Carries the last iterate and residual."""

    exit_code = 5

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class PropertyFailureError(P2LabError, RuntimeError):
    """One or more verification properties failed; message names them."""

    exit_code = 6
