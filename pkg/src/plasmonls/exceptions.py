"""Exception types raised across the package."""


class PlasmonLSError(Exception):
    """Base class for all package errors."""


class DomainError(PlasmonLSError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(PlasmonLSError, ValueError):
    """A model, grid or configuration failed construction-time validation."""


class EmptyMediumError(ValidationError):
    """Voxelization produced no voxels."""


class ConfigurationError(ValidationError):
    """Grid or run configuration is inconsistent (e.g. colliding PV nodes)."""


class ShapeMismatchError(PlasmonLSError, ValueError):
    """A block vector does not conform to the grid it is applied on."""


class SingularNodeError(PlasmonLSError, ValueError):
    """A spectral parameter coincides with a quadrature node where that is forbidden."""


class SingularityError(PlasmonLSError, ValueError):
    """A kernel was evaluated at coincident points."""


class DenseCapError(PlasmonLSError, RuntimeError):
    """The dense system size exceeds the configured cap."""


class SolverError(PlasmonLSError, RuntimeError):
    """A linear solve failed (singular system or non-convergent iteration)."""

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail or {}


class InteriorPointError(PlasmonLSError, ValueError):
    """An observable was requested at a point inside the medium."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = list(indices)
