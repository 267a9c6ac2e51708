"""Exception types shared across the toolkit."""


class GridMismatchError(ValueError):
    """Two fields (or a field and a kernel) do not live on the same grid."""


class ScaleError(ValueError):
    """A scale, radius or offset is not admissible on the grid."""


class TraceConvergenceError(RuntimeError):
    """One-sided half-ball averages did not settle within tolerance."""

    def __init__(self, message, failing=()):
        super().__init__(message)
        self.failing = list(failing)


class OnsfError(ValueError):
    """Base class for ONSF read/write failures."""


class BadMagicError(OnsfError):
    pass


class VersionMismatchError(OnsfError):
    pass


class TruncatedError(OnsfError):
    pass


class NonFiniteError(OnsfError):
    pass
