"""Superintegrable deformed oscillator on N-dimensional Darboux spaces.

Numerics for the Hamiltonian ``(p^2 + omega^2 q^2) / (2 (1 + lam q^2))``:
integrals of motion, the Staeckel construction from free motion, symplectic
dynamics, radial effective potentials and the hyperbolic-oscillator spectrum.
"""

__version__ = "0.1.0"

from .errors import (ChartError, ConvergenceError, DarbouxError, DegenerateStateError, DomainError,
                     DomainExitError, FlatLimitError, OriginError, ParameterError, RangeError, SingularityError,
                     UnboundOrbitError)
from .model import (Kind, ManifoldType, Parameters, PhaseState, classify_manifold, curvature_extrema, evaluate_H,
                    gradient_H, metric_factor, scalar_curvature, validate_domain)

__all__ = [
    "ChartError", "ConvergenceError", "DarbouxError", "DegenerateStateError", "DomainError", "DomainExitError",
    "FlatLimitError", "OriginError", "ParameterError", "RangeError", "SingularityError", "UnboundOrbitError",
    "Kind", "ManifoldType", "Parameters", "PhaseState", "classify_manifold", "curvature_extrema", "evaluate_H",
    "gradient_H", "metric_factor", "scalar_curvature", "validate_domain",
]
