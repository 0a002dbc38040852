"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised for malformed or non-finite numerical inputs."""


class ConfigError(ValueError):
    """Raised for invalid configuration values or inconsistent settings."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class RankDeficiencyError(ArithmeticError):
    """Raised when a triangular factor has a zero pivot."""

    def __init__(self, pivot):
        self.pivot = pivot
        super().__init__(f"factor is singular: zero pivot at index {pivot}")


class SimulationDivergenceError(RuntimeError):
    """Raised when a simulated state becomes non-finite."""

    def __init__(self, step, message="state became non-finite"):
        self.step = step
        super().__init__(f"{message} at step {step}")


class NonConvergenceError(RuntimeError):
    """Raised when an iterative solver fails; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)


class ControllabilityError(RuntimeError):
    """Raised when the Riccati recursion produces a non-finite cost-to-go."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"Riccati recursion blew up at step {step}")


class SchemaError(ValueError):
    """Raised when a serialized artifact fails schema or digest checks."""
