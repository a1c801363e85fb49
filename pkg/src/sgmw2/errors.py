class ConfigurationError(ValueError):
    """Invalid parameters or a violated precondition (for example h >= h_max)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
