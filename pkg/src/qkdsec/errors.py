"""Exception hierarchy. The CLI maps each class to its own exit status."""


class QkdsecError(Exception):
    exit_code = 1


class ValidationError(QkdsecError, ValueError):
    """Input violates a documented precondition or type invariant."""

    exit_code = 2


class NumericalError(QkdsecError, ArithmeticError):
    """An iterative routine failed to converge."""

    exit_code = 3


class ResourceError(QkdsecError):
    """A requested dimension exceeds the configured cap."""

    exit_code = 4


class InvariantError(QkdsecError, ArithmeticError):
    """A bound that must hold mathematically failed numerically."""

    exit_code = 3
