class QuadEitError(Exception):
    """Base error for every failure a command can report."""
    exit_code: int = 1
    category: str = 'error'


class ConfigError(QuadEitError):
    """Invalid, incomplete or contradictory configuration."""
    exit_code = 2
    category = 'config'


class DomainError(ConfigError, ValueError):
    """Input outside the domain where a formula is defined."""


class ConvergenceError(QuadEitError):
    """Self-consistent detuning loop did not settle."""
    exit_code = 3
    category = 'convergence'

    def __init__(self, message: str, last_iterates: tuple[float, float] = (float('nan'), float('nan'))):
        super().__init__(message)
        self.last_iterates = last_iterates


class NumericalError(QuadEitError):
    """Non-finite or degenerate intermediate result."""
    exit_code = 4
    category = 'numerical'


class DivergenceError(NumericalError):
    """ODE state became NaN or overflowed."""

    def __init__(self, message: str, step: int = -1):
        super().__init__(message)
        self.step = step


class NoDipError(NumericalError):
    """No interior minimum of the in-phase quadrature in the search window."""


class InsufficientSpanError(NumericalError):
    """Half-depth crossings of the dip are not bracketed by the grid."""


class VerificationError(NumericalError):
    """Oracle harmonics disagree with the closed-form response."""
