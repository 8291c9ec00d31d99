"""Exception hierarchy; each class maps to a CLI exit code."""


class RobustTError(Exception):
    exit_code = 1


class InvalidInputError(RobustTError, ValueError):
    exit_code = 2


class ImproperPosteriorError(RobustTError):
    """A properness (or convergence) condition needed by the target fails."""

    exit_code = 3


class NumericalError(RobustTError, ArithmeticError):
    exit_code = 4
