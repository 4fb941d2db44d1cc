"""Exception types shared across the package."""


class QdtnError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(QdtnError):
    """Operands have incompatible matrix dimensions."""


class NotHermitian(QdtnError):
    """Matrix fails the Hermiticity check; message carries the deviation."""


class TraceNotOne(QdtnError):
    """Matrix trace differs from 1; message carries the deviation."""


class NotPSD(QdtnError):
    """Matrix has an eigenvalue below the allowed negative tolerance."""


class StepUnstable(QdtnError):
    """An integration step produced a state failing relaxed validation."""


class DegenerateLoss(QdtnError):
    """Batch loss is (numerically) zero: there is nothing left to train."""


class SingularSystem(QdtnError):
    """The damped normal equations stayed singular after jitter retries."""


class SourceTooSmall(QdtnError):
    """Image is smaller than the requested downsampling grid."""


class UnpairableEntry(QdtnError):
    """A spectrum entry has no conjugate partner; source was not a real image."""


class ZeroMatrix(QdtnError):
    """All-zero matrix cannot be normalized into a state."""
