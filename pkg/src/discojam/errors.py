"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value or file violates a documented constraint."""


class MissingJammerError(ConfigError):
    """An active-jammer quantity was requested but no jammer is configured."""


class SingularChannelError(RuntimeError):
    """Zero-forcing is unavailable because the direct channel is (near) rank deficient.

    Carries the observed condition number when known.
    """

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class DegenerateChannelError(ValueError):
    """A channel quantity that must be nonzero (a norm, a distance) vanished."""


class RetractionError(ArithmeticError):
    """A manifold retraction hit an element with vanishing magnitude."""


class NumericalError(RuntimeError):
    """An optimizer produced a non-finite value; carries a short state dump."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
