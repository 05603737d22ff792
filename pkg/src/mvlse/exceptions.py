"""Exception types raised by the toolkit."""


class GridMismatchError(ValueError):
    """The horizon, step count and delay length do not share a common step."""


class CouplingError(ValueError):
    """Two empirical laws cannot be coupled (unequal particle counts)."""


class NearSingularDiffusionError(RuntimeError):
    """sigma sigma* is too ill-conditioned to invert reliably."""


class DivergenceError(RuntimeError):
    """A simulated state became non-finite; carries the offending step."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class SingularDesignError(RuntimeError):
    """The closed-form normal equations are singular (degenerate design)."""


class EstimationFailedError(RuntimeError):
    """No finite contrast value was found at any probed parameter."""


class NonIdentifiableError(RuntimeError):
    """The information matrix at the true parameter is singular."""


class ConfigError(ValueError):
    """An experiment configuration document failed to parse or validate."""
