"""Exception hierarchy.

Two families matter to callers: :class:`InputError` (bad data, bad
specs, bad dimensions) and :class:`NumericalError` (a computation that
could not be carried out).  The CLI maps them to exit codes 2 and 3.
"""


class GPError(Exception):
    """Base class for every error raised by this package."""


class InputError(GPError, ValueError):
    pass


class NumericalError(GPError, ArithmeticError):
    pass


class NotSymmetric(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NonFinite(InputError):
    pass


class EmptyData(InputError):
    pass


class PeriodicOnMultiDim(InputError):
    pass


class DuplicateNoise(InputError):
    pass


class NonPositiveParam(InputError):
    pass


class SingleClassData(InputError):
    pass


class ZeroVarianceColumn(InputError):
    pass


class NonFiniteStart(InputError):
    pass


class ParseError(InputError):
    """Kernel-spec or CSV syntax error.

    ``position`` is a 0-based character offset into ``text`` (kernel
    specs) or ``None``; ``line``/``column`` are 1-based and used for CSV.
    """

    def __init__(self, message, text=None, position=None, line=None, column=None):
        self.text = text
        self.position = position
        self.line = line
        self.column = column
        super().__init__(message)

    def caret(self):
        """Two-line rendering of ``text`` with a caret under ``position``."""
        if self.text is None or self.position is None:
            return str(self)
        return f"{self.text}\n{' ' * self.position}^"


class NotPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class OptimizerDiverged(NumericalError):
    pass


class GradientMismatch(NumericalError):
    pass
