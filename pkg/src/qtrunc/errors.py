"""Exception types raised across the package."""


class QtruncError(Exception):
    """Base class for all package errors."""


class SchemaError(QtruncError, ValueError):
    """A configuration document does not match the expected schema."""


class CertificateViolation(QtruncError):
    """A weak-coupling certificate does not hold on the checked levels."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class DegenerateSpectrum(QtruncError, ValueError):
    """A zero (or negative) energy appears where a division by it is needed."""


class NonTridiagonal(QtruncError, ValueError):
    """The operation needs a tridiagonal coupling."""


class DimensionMismatch(QtruncError, ValueError):
    pass


class NonFiniteField(QtruncError, ValueError):
    pass


class NonConvergence(QtruncError, RuntimeError):
    """The monotonic optimizer lost monotonicity (an implementation bug)."""


class BoundOverflow(QtruncError, OverflowError):
    """A bound exceeds the double range; ``log10`` carries its magnitude."""

    def __init__(self, message, log10):
        super().__init__(message)
        self.log10 = log10
