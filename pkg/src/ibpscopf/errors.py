"""Exception hierarchy shared by every stage of the bounding pipeline."""


class ScopfError(Exception):
    """Base class for all package errors."""


class SchemaError(ScopfError, ValueError):
    """A case file field is missing, unknown or has the wrong type."""


class ValidationError(ScopfError, ValueError):
    """A case parsed but violates a model invariant."""


class DisconnectedError(ScopfError):
    """The (possibly post-outage) network is not connected."""


class SingularMatrixError(ScopfError, ArithmeticError):
    pass


class IslandingError(ScopfError):
    """Removing a contingency line disconnects the network."""

    def __init__(self, line_id, denominator):
        self.line_id = line_id
        self.denominator = denominator
        super().__init__(
            f"contingency on line {line_id} islands the network "
            f"(Sherman-Morrison denominator {denominator:.3e})"
        )


class DimensionError(ScopfError, ValueError):
    pass


class NegativeRadiusError(ScopfError, ValueError):
    pass


class CurveShapeError(ScopfError, ValueError):
    pass


class DomainError(ScopfError, ValueError):
    """Evaluation requested outside the device box."""


class ConsistencyError(ScopfError):
    """Upstream operators disagree on dimensions."""


class NonpositiveReferenceError(ScopfError, ValueError):
    pass


class DimensionTooLargeError(ScopfError, ValueError):
    pass


class NonFiniteError(ScopfError, ArithmeticError):
    """A NaN or infinity reached an interval; the certificate would be void."""
