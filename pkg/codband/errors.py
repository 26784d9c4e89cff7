"""
Exception hierarchy
Every error raised by the library derives from CodbandError
"""


class CodbandError(Exception):
    """Base class for library errors"""


class ParameterError(CodbandError, ValueError):
    """A hyperparameter or argument is outside its valid range"""


class DimensionMismatchError(CodbandError, ValueError):
    """Vector or matrix dimensions disagree with the model dimension"""


class PosteriorCorruptionError(CodbandError, RuntimeError):
    """A downdate would leave the precision matrix not positive definite"""


class NumericalError(CodbandError, ArithmeticError):
    """Factorization failure or total underflow of a weight vector"""


class InfeasibleParameterError(CodbandError, ValueError):
    """No finite value satisfies the requested bound"""


class ConfigError(CodbandError, ValueError):
    """Invalid experiment configuration"""


class EventLogFormatError(CodbandError, ValueError):
    """Malformed event log line"""

    def __init__(self, message: str, line_number: int = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UnsupportedOperationError(CodbandError, RuntimeError):
    """Operation needs information that is not available here"""


class ProtocolError(CodbandError, RuntimeError):
    """Policy calls arrived out of order"""
