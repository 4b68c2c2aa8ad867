"""Exception and warning types shared across the package."""


class SwarmSeekError(Exception):
    pass


class ConfigError(SwarmSeekError, ValueError):
    """Invalid configuration or model parameters."""


class DegenerateSwarmError(SwarmSeekError):
    """The swarm spread is zero, so no ascending direction can be formed."""


class SingularityError(SwarmSeekError):
    """The guiding field is undefined at the requested state."""


class SimulationError(SwarmSeekError):
    """Integration failed. ``samples`` holds whatever was computed before the failure."""

    def __init__(self, message, samples=None, t=None):
        super().__init__(message)
        self.samples = samples if samples is not None else []
        self.t = t


class StiffnessError(SimulationError):
    """Adaptive step size collapsed below the configured minimum."""


class DegeneracyWarning(UserWarning):
    """The swarm geometry does not span the space."""
