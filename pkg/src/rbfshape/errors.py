"""Exception types shared across the package."""


class RbfShapeError(Exception):
    """Base class for all package-specific errors."""


class DegenerateCloudError(RbfShapeError, ValueError):
    """Point cloud contains duplicate points or too few points."""


class SingularMatrixError(RbfShapeError):
    """Matrix is singular at working precision."""


class IllConditionedSolveError(RbfShapeError):
    """Linear solve failed or produced an untrustworthy result.

    Carries the estimated condition number of the system when one could be
    computed, and the stencil index when raised during operator assembly so
    the caller can re-select that stencil's shape parameter.
    """

    def __init__(
        self,
        message: str,
        estimated_cond: float | None = None,
        stencil_id: int | None = None,
    ):
        super().__init__(message)
        self.estimated_cond = estimated_cond
        self.stencil_id = stencil_id


class NoFeasibleCandidateError(RbfShapeError):
    """Every candidate in a search grid was rejected as ill-conditioned."""


class GuaranteeViolationError(RbfShapeError):
    """The fallback pipeline could not produce a shape parameter meeting
    the configured condition threshold."""


class InvalidModelError(RbfShapeError, ValueError):
    """Model structure is inconsistent (e.g. layer dimension mismatch)."""


class ModelFormatError(RbfShapeError, ValueError):
    """Model file is missing, truncated, or structurally invalid."""


class UnsupportedModelVersionError(ModelFormatError):
    """Model file declares a format version this code does not support."""
