"""Exception types raised by the library."""


class LqgTransferError(Exception):
    """Base class for all library errors."""


class InvalidInputError(LqgTransferError):
    """Input contains NaN/Inf entries or violates a basic type invariant."""


class DimensionError(LqgTransferError):
    """Matrix dimensions are inconsistent for the requested operation."""


class NumericalFailureError(LqgTransferError):
    """An iterative or conditioning-sensitive computation failed.

    Carries optional diagnostics (iteration counts, residuals) in
    ``self.diagnostics``.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class AssumptionViolationError(LqgTransferError):
    """A structural assumption (observability/controllability of the
    compensator, full-rank conditions, persistency of excitation) fails."""


class InsufficientDataError(LqgTransferError):
    """Trajectory too short for the requested windows/columns.

    ``required`` holds the minimum number of samples needed.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class DiversityError(LqgTransferError):
    """Source tasks are not diverse enough: the intersected kernel has the
    wrong dimension.  ``achieved`` holds the dimension actually found."""

    def __init__(self, message, achieved=None, expected=None):
        super().__init__(message)
        self.achieved = achieved
        self.expected = expected


class InconsistentDataError(LqgTransferError):
    """Data is not consistent with any static gain at the requested window
    depth (residual above tolerance)."""
