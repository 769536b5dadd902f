class MincurvError(Exception):
    pass


class EmptySetError(MincurvError, ValueError):
    """Raised when an operation needs a nonempty set (mask, obstacle boundary)."""


class CoverageError(MincurvError, ValueError):
    pass


class StabilityError(MincurvError, ValueError):
    """Explicit step requested with a time step above the stability bound."""


class DegenerateCenterError(MincurvError, ValueError):
    pass


class InvalidStartError(MincurvError, ValueError):
    pass


class PreconditionError(MincurvError, ValueError):
    pass


class ConfigError(MincurvError, ValueError):
    """Config file could not be parsed or violates a run invariant."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes if nodes is not None else []
