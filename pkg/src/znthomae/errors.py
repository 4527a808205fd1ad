"""Exception hierarchy shared by every module of the package."""


class ZNError(Exception):
    """Base class for all errors raised by :mod:`znthomae`."""


class CurveValidationError(ZNError, ValueError):
    """Invalid curve input. ``index`` points at the offending branch point, if any."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class PartitionError(ZNError, ValueError):
    pass


class DomainError(ZNError, ValueError):
    """An operation was evaluated outside of its domain (branch point, bad index, ...)."""


class ContinuationError(ZNError, RuntimeError):
    """Root tracking could not proceed; ``position`` is the last accepted z."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class IntegrationError(ZNError, RuntimeError):
    pass


class BasisConstructionError(ZNError, RuntimeError):
    pass


class ThetaDomainError(ZNError, ValueError):
    pass


class ThetaPrecisionError(ZNError, RuntimeError):
    pass


class CharacteristicError(ZNError, RuntimeError):
    """Rounding of a characteristic to the 1/(2N) grid left a residual above tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularThetaError(ZNError, RuntimeError):
    pass


class SampleRejected(ZNError, RuntimeError):
    """A kernel sample point had to be discarded (near a zero, a branch point, ...)."""
