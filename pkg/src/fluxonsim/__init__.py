"""Classical fluxons with internal angles in a bath of trivial charges.

The closed-loop relative internal angle of two fluxons recovers 2 pi n xi
modulo 2 pi exactly, however the bath scrambles the angles along the way.
"""

__version__ = "0.1.0"

from .dynamics import StepPolicy, materialize_world, run, step
from .errors import (
    Coincident,
    ConfigInvalid,
    EmptySample,
    EndpointsMismatch,
    FluxonSimError,
    InsufficientEnsemble,
    NotInteger,
    OutOfDomain,
    RegionTooSmall,
    StepTooCoarse,
)
from .experiments import (
    DwellSchedule,
    circle_loop,
    default_region,
    run_locality_probe,
    run_scalar_ab,
    run_single_fluxon,
    run_three_fluxon,
    run_two_fluxon_loop,
    run_two_fluxon_open,
    star_loop,
    wavy_loop,
)

__all__ = [
    "StepPolicy",
    "materialize_world",
    "run",
    "step",
    "Coincident",
    "ConfigInvalid",
    "EmptySample",
    "EndpointsMismatch",
    "FluxonSimError",
    "InsufficientEnsemble",
    "NotInteger",
    "OutOfDomain",
    "RegionTooSmall",
    "StepTooCoarse",
    "DwellSchedule",
    "circle_loop",
    "default_region",
    "star_loop",
    "wavy_loop",
    "run_locality_probe",
    "run_scalar_ab",
    "run_single_fluxon",
    "run_three_fluxon",
    "run_two_fluxon_loop",
    "run_two_fluxon_open",
]
