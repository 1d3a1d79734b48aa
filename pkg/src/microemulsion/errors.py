"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A caller passed an argument outside an operation's domain."""


class SolverFailure(RuntimeError):
    """A sparse linear solve failed (singular matrix, stagnating iteration...)."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class NonConvergence(RuntimeError):
    """The Picard iteration hit its cap or produced non-finite values.

    ``history`` holds the relative increments observed so far, one per
    iteration, and ``step`` the index of the time step being attempted.
    """

    def __init__(self, message, history=(), step=None):
        super().__init__(message)
        self.history = list(history)
        self.step = step


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` points into the source text when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
