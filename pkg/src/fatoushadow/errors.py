"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class FatouShadowError(Exception):
    """Base class for all library errors."""


class PreconditionError(FatouShadowError, ValueError):
    """Input violates a mathematical precondition (bad map, bad base point)."""


class DomainError(PreconditionError):
    """A point lies outside the region where the operation is defined."""


class NumericError(FatouShadowError, ArithmeticError):
    """A computation failed numerically."""


class ConvergenceError(NumericError):
    def __init__(self, message, worst_residual=float("nan")):
        super().__init__(message)
        self.worst_residual = worst_residual


class CapacityError(NumericError):
    def __init__(self, message, depth_reached=None):
        super().__init__(message)
        self.depth_reached = depth_reached


class BoundaryOverflowError(NumericError):
    """Hyperbolic distance requested between points numerically on the circle."""


class AnnulusNotFoundError(NumericError):
    def __init__(self, message, achieved_margin=float("nan")):
        super().__init__(message)
        self.achieved_margin = achieved_margin
