"""Exception hierarchy shared across the package."""


class FluxonSimError(Exception):
    """Base class for all errors raised by fluxonsim."""


class Coincident(FluxonSimError):
    """A tracked particle came within the collision epsilon of an angle center.

    ``t`` and ``pair`` are filled in by the stepper when known, so callers
    (the ensemble harness in particular) can report and re-seed.
    """

    def __init__(self, message, t=None, pair=None):
        super().__init__(message)
        self.t = t
        self.pair = pair


class StepTooCoarse(FluxonSimError):
    """A wrapped angle increment exceeded the sub-step threshold."""


class NotInteger(FluxonSimError):
    """An accumulated angle was not an integer number of turns."""


class OutOfDomain(FluxonSimError):
    """A trajectory was evaluated outside its time interval."""


class RegionTooSmall(FluxonSimError):
    """The bath region cannot host the requested particle count."""


class EndpointsMismatch(FluxonSimError):
    """Two paths that must share endpoints do not."""


class InsufficientEnsemble(FluxonSimError):
    """An ensemble is too small for the requested statistic."""


class EmptySample(FluxonSimError, ValueError):
    """A statistic was requested on an empty sample."""


class ConfigInvalid(FluxonSimError, ValueError):
    """A configuration value failed validation; ``field`` names the entry."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
