"""Exception hierarchy shared by all parastab modules."""


class ParastabError(Exception):
    """Base class for all library errors."""


class InputError(ParastabError, ValueError):
    """Raised when an argument violates a documented precondition."""


class PreconditionError(ParastabError):
    """Raised when a state-dependent precondition fails (e.g. not an equilibrium)."""


class NumericOverflowError(ParastabError, ArithmeticError):
    """A pointwise map produced a non-finite value.

    ``node`` is the collocation abscissa where it happened and ``component``
    the offending component index.
    """

    def __init__(self, message, node=None, component=None):
        super().__init__(message)
        self.node = node
        self.component = component


class DivergenceError(ParastabError, ArithmeticError):
    """A supremum or series does not converge for the requested parameters."""


class NumericError(ParastabError, ArithmeticError):
    """A numerical procedure (quadrature, iteration) failed to converge."""
