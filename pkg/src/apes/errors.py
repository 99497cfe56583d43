"""Exception hierarchy shared across the package."""


class ParameterError(ValueError):
    """An argument violates the documented domain of an operation."""


class UnsupportedConfigurationError(ParameterError):
    """The operation has no closed form for this configuration."""


class InsufficientEchoMassError(ParameterError):
    """The shuffle bound does not apply: too little echo mass for this delta.

    Raised instead of returning a clamped value, since a bound reported
    outside its precondition is not a privacy guarantee.
    """

    def __init__(self, echo_mass: float, threshold: float):
        self.echo_mass = float(echo_mass)
        self.threshold = float(threshold)
        super().__init__(
            f"echo mass {self.echo_mass:.6g} is below the required "
            f"16*ln(4/delta) = {self.threshold:.6g}; more users or smaller "
            "budgets are needed for the shuffle bound to apply"
        )


class StateError(RuntimeError):
    """An operation was applied to an object in the wrong state."""
