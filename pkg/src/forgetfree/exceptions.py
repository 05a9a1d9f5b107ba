"""
Contains the exceptions raised by the package.
"""


class ForgetFreeError(Exception):
    """Base class for all errors raised by the package."""


class FormatError(ForgetFreeError, ValueError):
    """Raised when a file does not follow its documented binary format."""


class ConsistencyError(ForgetFreeError, ValueError):
    """Raised when parts of a dataset disagree with each other."""


class DataError(ForgetFreeError, ValueError):
    """Raised when a dataset contains values that cannot be used."""


class NumericalError(ForgetFreeError, ArithmeticError):
    """Raised when a linear-algebra step cannot be carried out."""


class DivergenceError(ForgetFreeError, ArithmeticError):
    """Raised when the sparse solver iterates away from any solution.

    The gain and iteration count are kept so callers can report them, and
    `index` names the offending problem when a stack of problems is solved
    at once.
    """

    def __init__(
        self,
        message: str,
        gamma: float,
        iteration: int,
        index: int | None = None,
    ) -> None:
        """Initializes the DivergenceError object."""
        super().__init__(message)
        self.gamma = gamma
        self.iteration = iteration
        self.index = index


class RunError(ForgetFreeError):
    """Raised when one run of an experiment fails.

    The message names the run and the variant; the original error is kept
    as the cause.
    """

    def __init__(self, message: str, run: int, variant: str) -> None:
        """Initializes the RunError object."""
        super().__init__(message)
        self.run = run
        self.variant = variant
