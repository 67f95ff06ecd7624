"""Exception types; the CLI maps them to exit codes."""


class ValidationError(ValueError):
    """Bad input: malformed files, invalid dimensions or parameters."""


class NumericalError(ArithmeticError):
    """A factorization or sampler failed on numerically degenerate input."""
