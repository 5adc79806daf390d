"""Exception hierarchy shared by all modules."""


class VineError(Exception):
    """Base class for every error raised by this package."""


class StructureError(VineError, ValueError):
    pass


class NotATree(StructureError):
    pass


class ProximityViolation(StructureError):
    pass


class BadIndex(StructureError):
    pass


class BadDimension(VineError, ValueError):
    pass


class BadTruncationLevel(VineError, ValueError):
    pass


class DomainError(VineError, ValueError):
    pass


class StructureMismatch(VineError, ValueError):
    pass


class DimensionMismatch(VineError, ValueError):
    pass


class NumericalError(VineError, ArithmeticError):
    """Numerical routine failed; the CLI maps these to exit code 3."""


class NonConvergence(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class SingularInformation(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class NotNested(VineError, ValueError):
    pass


class EmptyInput(VineError, ValueError):
    pass


class EmptyCell(VineError, ValueError):
    pass


class NonNumericInput(VineError, ValueError):
    pass
