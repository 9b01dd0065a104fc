"""Bounds on the lowest levels of anisotropic potentials from their angular average."""

from .errors import ConfigError, ConvergenceError, ZeroMeanError
from .pipeline import analyse, parse_config
from .potential import AngularQuadrature, PotentialField, PotentialSpec, load_spec, spec_from_dict

__version__ = "0.1.0"

__all__ = [
    "AngularQuadrature", "ConfigError", "ConvergenceError", "PotentialField", "PotentialSpec",
    "ZeroMeanError", "analyse", "load_spec", "parse_config", "spec_from_dict",
]
