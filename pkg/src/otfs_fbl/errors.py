"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration (bad grid geometry, channel parameters, sweep spec).

    May carry a list of all detected violations in ``violations``.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations is not None else [message]


class AllocationError(ValueError):
    """Power allocation is impossible (no path can carry power)."""


class NumericalError(ArithmeticError):
    """A linear-algebra step failed; the message carries matrix diagnostics."""
