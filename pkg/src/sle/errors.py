"""Shared exception types."""


class ShapeError(ValueError):
    """Array shape or dimension violates an operation's contract."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class DegenerateInputError(ValueError):
    """Input too close to zero for a normalizing operation."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


class SamplingError(RuntimeError):
    """The sampling loop hit a degenerate state."""
