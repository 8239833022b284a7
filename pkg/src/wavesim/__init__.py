"""Scattered-field Helmholtz simulation with physics-informed networks whose
output layer is solved by damped least squares (LS-GD), plus a
finite-difference reference solver."""

from .estimator import ScatteredFieldPINN
from .exceptions import ConfigError, DomainError, FormatError, SolverError, WavesimError
from .fd import ComplexField, fd_reference
from .medium import Domain, HelmholtzProblem, PMLSpec, SourceSpec, VelocityModel

__version__ = "0.1.0"

__all__ = [
    "ScatteredFieldPINN", "ComplexField", "fd_reference", "Domain",
    "HelmholtzProblem", "PMLSpec", "SourceSpec", "VelocityModel",
    "WavesimError", "ConfigError", "DomainError", "FormatError", "SolverError",
]
