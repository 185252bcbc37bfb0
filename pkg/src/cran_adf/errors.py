"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration parameters."""


class DimensionError(ValueError):
    """Array shapes that do not agree with each other."""


class InfeasibleError(RuntimeError):
    """No assignment satisfies the loading/exclusivity constraints."""

    def __init__(self, message, ad=None):
        super().__init__(message)
        self.ad = ad


class EvaluationError(RuntimeError):
    """Metrics requested for a network that is missing precoders."""
