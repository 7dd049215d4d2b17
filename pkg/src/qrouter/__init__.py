"""Simulation of photon storage and redirection in a cold-atom spin wave."""

__version__ = "0.1.0"

from .core import GridSpec, PhysicalUnits, SimParams, make_params, params_for_depth  # noqa: E402
from .pulses import ControlSpec, SignalSpec  # noqa: E402

__all__ = ["GridSpec", "PhysicalUnits", "SimParams", "make_params", "params_for_depth",
           "ControlSpec", "SignalSpec", "__version__"]
