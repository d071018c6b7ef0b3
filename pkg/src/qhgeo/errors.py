"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised for invalid shapes, parameters, or scenario files.

    The CLI maps this to exit code 2.
    """


class InternalError(RuntimeError):
    """Raised when a structural invariant is violated at runtime.

    Examples: an unreachable vertex in a graph that passed the
    connectivity check, or a geodesic walk that fails to make progress.
    """
