"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, physical or observer parameters."""


class GridMismatchError(ValueError):
    """Two fields (or a field and an observation) live on different grids."""


class ObserverTooCoarseError(ValueError):
    """Observation resolution leaves no Fourier mode to observe."""


class StepError(RuntimeError):
    """A time step was refused by a stability guard.

    ``magnitude`` carries the offending value (CFL number or mu*dt).
    """

    def __init__(self, message: str, magnitude: float):
        super().__init__(message)
        self.magnitude = magnitude
