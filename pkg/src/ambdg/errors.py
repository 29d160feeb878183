class ConfigError(ValueError):
    """Invalid configuration or mismatched inputs."""


class InvariantError(RuntimeError):
    """A simulation invariant was violated; the replication is aborted."""


class NumericalError(ArithmeticError):
    """An iterative routine failed to converge or hit a degenerate value."""
