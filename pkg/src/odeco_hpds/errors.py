"""Exception hierarchy shared across the library and the CLI."""


class HPDSError(Exception):
    """Base class for all library-specific failures."""


class SymmetryError(HPDSError, ValueError):
    """Ingested entries deviate from the required index symmetry."""


class DecompositionError(HPDSError):
    """Power-iteration deflation stagnated before producing n eigenpairs."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class NotOdecoError(HPDSError):
    """Closed-form machinery refused a decomposition whose residual is too large.

    General (non-odeco) systems should go through the transform module
    instead.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainError(HPDSError):
    """Requested evaluation time lies outside the solution's validity interval."""

    def __init__(self, message, domain_end=None):
        super().__init__(message)
        self.domain_end = domain_end


class BranchPointError(HPDSError, ValueError):
    """Hypergeometric argument on or beyond the branch point at one."""


class PathCrossingError(HPDSError):
    """Integration path for a modal time map crosses an equilibrium pole."""


class BlowupError(HPDSError):
    """A modal coordinate escapes to infinity before the requested time."""

    def __init__(self, message, escape_time=None):
        super().__init__(message)
        self.escape_time = escape_time


class NoEquilibriumError(HPDSError):
    """A mode admits no real equilibrium for the given control."""

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class NotTransformableError(HPDSError):
    """No inverse-transpose structured fit below threshold was found."""

    def __init__(self, message, fit_error=None):
        super().__init__(message)
        self.fit_error = fit_error


class FitError(HPDSError):
    """The structured fit failed numerically on every restart."""

    def __init__(self, message, best_error=None):
        super().__init__(message)
        self.best_error = best_error


class InputError(HPDSError, ValueError):
    """Malformed system-spec file or CLI arguments."""


class RefusalError(HPDSError):
    """The requested analysis does not apply to this input."""
