"""Exception hierarchy shared across the package."""


class LeoIsacError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LeoIsacError, ValueError):
    """Invalid or inconsistent configuration values."""


class GeometryError(LeoIsacError, ValueError):
    """Degenerate geometry, e.g. a target co-located with a satellite."""


class SingularJacobianError(GeometryError):
    """Target directly above/below a satellite, so azimuth is undefined."""


class GroupError(LeoIsacError, ValueError):
    """Not enough neighbours to build the requested serving group."""


class ParameterError(LeoIsacError, ValueError):
    """Invalid numeric argument (non-positive noise, empty lists, ...)."""


class DegenerateSignalError(LeoIsacError, ValueError):
    """Probing signal is identically zero so the estimator is undefined."""


class SingularNuisanceError(LeoIsacError, ValueError):
    """Fisher information of the reflection coefficient is zero."""


class UnobservableGeometryError(LeoIsacError, ValueError):
    """Position Fisher information is singular."""


class ResourceError(LeoIsacError, RuntimeError):
    """Requested computation exceeds the configured resource limit."""


class AnchorError(LeoIsacError, ValueError):
    """SCA expansion point gives a non-positive log argument."""


class BaselineUnavailableError(LeoIsacError, ValueError):
    """Zero-forcing baseline cannot be built (rank deficiency or budget)."""


class InfeasibleError(LeoIsacError, RuntimeError):
    """Optimization instance is infeasible.

    Attributes:
        binding: ``"rate"``, ``"power"`` or ``"crb"``, best guess of the
            constraint family that makes the instance infeasible.
        power_ratio: smallest feasible scaling of the power budgets found by
            the phase-1 diagnosis (``inf`` when unknown).
    """

    def __init__(self, message, binding="unknown", power_ratio=float("inf")):
        super().__init__(message)
        self.binding = binding
        self.power_ratio = power_ratio


class NumericalError(LeoIsacError, RuntimeError):
    """Conic backend failed for numerical reasons."""


class ExperimentAbortedError(LeoIsacError, RuntimeError):
    """More than half of the Monte Carlo trials failed.

    Attributes:
        report: per-trial failure records collected before aborting.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = list(report or [])
