"""Throughput, efficiency and black-out analysis of a roadside RF energy harvester.

The device harvests from passing vehicles while the nearest one is within
the harvest distance ``ell`` and transmits to an access point otherwise.
Analytic results come from a quantized battery Markov chain; a slot-level
simulator provides the ground truth.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0+unknown"

from .scenario import (  # noqa: E402
    BASELINE,
    Derived,
    Platoon,
    Poisson,
    Rayleigh,
    Rician,
    Scenario,
    ScenarioError,
    build_scenario,
    decoding_probability,
)
from .energy_cdf import NumericalError, energy_cdf  # noqa: E402
from .battery import steady_state, transition_matrix  # noqa: E402
from .metrics import efficiency, energy_density, throughput  # noqa: E402
from .blackout import blackout_probability, blackout_query  # noqa: E402
from .simulator import AllWithin, ClosestOnly, SimConfig, run_simulation  # noqa: E402

__all__ = [
    "BASELINE",
    "Derived",
    "Platoon",
    "Poisson",
    "Rayleigh",
    "Rician",
    "Scenario",
    "ScenarioError",
    "NumericalError",
    "build_scenario",
    "decoding_probability",
    "energy_cdf",
    "transition_matrix",
    "steady_state",
    "throughput",
    "energy_density",
    "efficiency",
    "blackout_query",
    "blackout_probability",
    "SimConfig",
    "ClosestOnly",
    "AllWithin",
    "run_simulation",
]
