"""Decoherent continuous-time quantum walk on an N-node cycle.

Closed-form populations, a brute-force master-equation integrator to check
them against, the Fourier-mode spectrum of the generator, and mixing-time
analysis.
"""

from .closed_form import ClosedFormEvaluator, gamma_from_device, s_kernel
from .errors import (
    CapacityError,
    ConsistencyError,
    CycleWalkError,
    DomainError,
    ExcludedModeError,
    IntegrationDivergedError,
    StructuralError,
    UnboundedError,
)
from .mixing import deviation_series, deviation_sum, gamma_sweep, majorizer, mixing_time_bound, mixing_time_numeric
from .model import (
    DensityMatrix,
    DeviationSeries,
    InitialDistribution,
    ModeClass,
    ProbabilityDistribution,
    SpectralMode,
    WalkParams,
    validate_density_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ClosedFormEvaluator",
    "ConsistencyError",
    "CycleWalkError",
    "DensityMatrix",
    "DeviationSeries",
    "DomainError",
    "ExcludedModeError",
    "InitialDistribution",
    "IntegrationDivergedError",
    "ModeClass",
    "ProbabilityDistribution",
    "SpectralMode",
    "StructuralError",
    "UnboundedError",
    "WalkParams",
    "deviation_series",
    "deviation_sum",
    "gamma_from_device",
    "gamma_sweep",
    "majorizer",
    "mixing_time_bound",
    "mixing_time_numeric",
    "s_kernel",
    "validate_density_matrix",
]
