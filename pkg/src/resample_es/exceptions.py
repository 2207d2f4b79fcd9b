"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A parameter is outside its admissible range."""


class DimensionError(ValueError):
    """A point does not have the dimension of the problem."""


class BudgetExhausted(RuntimeError):
    """The remaining evaluation budget cannot pay for another iteration."""


class TooFewPointsError(ValueError):
    """A regression window holds fewer points than required."""


class ConfigError(ValueError):
    """An experiment configuration failed validation.

    ``violations`` lists every problem found, not only the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TraceFormatError(ValueError):
    """A trace file is missing, truncated or malformed."""

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"{path}: {reason}")
