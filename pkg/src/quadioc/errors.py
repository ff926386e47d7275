"""Exception hierarchy shared by every module."""


class QuadIOCError(Exception):
    """Base class for all errors raised by quadioc."""


class DimensionError(QuadIOCError, ValueError):
    """Array shapes do not agree with the problem dimensions."""


class NotSymmetricError(QuadIOCError, ValueError):
    """A weight matrix is not symmetric within tolerance."""


class NotPositiveDefiniteError(QuadIOCError, ValueError):
    """A weight matrix failed the Cholesky definiteness test."""


class ExpressionSyntaxError(QuadIOCError, ValueError):
    """Malformed expression text.  ``position`` is a 0-based column."""

    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        where = f" at position {position}" if text else ""
        super().__init__(f"{message}{where}" + (f": {text!r}" if text else ""))


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class VariableIndexError(ExpressionSyntaxError):
    pass


class DomainError(QuadIOCError, ArithmeticError):
    """Expression evaluated outside the domain of an operation."""


class ConfigError(QuadIOCError, ValueError):
    """A system configuration could not be turned into a model."""


class ModelAssumptionError(QuadIOCError):
    """The model violates a standing assumption (R > 0, rank of g, f(0) = 0).

    ``state`` holds the offending state when one is known.
    """

    def __init__(self, message, state=None):
        self.state = state
        if state is not None:
            message = f"{message} at x = {list(map(float, state))}"
        super().__init__(message)


class RegimeError(QuadIOCError, ValueError):
    """Operation called on a system of the wrong time regime or input count."""


class DivergenceError(QuadIOCError):
    """Numerical integration produced a non-finite state."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class OracleError(QuadIOCError):
    """The brute-force minimizer could not bracket an interior minimum."""
