"""sdskit: simulation and verification toolkit for iterated random maps on the half-line.

Subpackages:
  distributions - parameter laws (sampling, CDFs, log-moments, lattice span)
  maps          - map descriptors and system specifications
  hyperbolic    - Poincare half-plane metric and the extended-space metric
  engine        - chunked, reproducible trajectory simulation; ladder epochs
  diagnostics   - contractivity / escape / recurrence witnesses
  measures      - invariant measures, KS distances, Kac formula, Wiener-Hopf
  dyadic        - exact rational arithmetic for the base-2/base-3 examples
  cli           - batch experiment runner (TOML configs)
"""

from . import diagnostics, distributions, dyadic, engine, hyperbolic, maps, measures
from .engine import SimulationPlan, TrajectoryBundle, ladder_epochs, right_process, simulate
from .errors import (
    ConfigurationError,
    DomainError,
    IdentityViolation,
    SdsError,
    UnsupportedError,
)
from .maps import SystemSpec

__all__ = [
    "ConfigurationError",
    "DomainError",
    "IdentityViolation",
    "SdsError",
    "SimulationPlan",
    "SystemSpec",
    "TrajectoryBundle",
    "UnsupportedError",
    "diagnostics",
    "distributions",
    "dyadic",
    "engine",
    "hyperbolic",
    "ladder_epochs",
    "maps",
    "measures",
    "right_process",
    "simulate",
]

__version__ = "0.1.0"
