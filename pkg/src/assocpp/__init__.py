"""Determinantal point processes: mixing bounds, CLT checks for local
statistics and two-step parametric estimation."""

from .errors import (
    AssocPPError,
    ConvergenceError,
    DesignError,
    DomainError,
    ExistenceError,
    NumericError,
    ParameterError,
    ResourceError,
)
from .kernels import (
    AffineCovariates,
    CorrelationFamily,
    Homogeneous,
    KernelSpec,
    LogLinear,
    omega,
    spectral_density,
)
from .sampler import PointPattern, sample_dpp, sample_poisson
from .streams import stream
from .window import Window

__version__ = "0.1.0"

__all__ = [
    "AffineCovariates",
    "AssocPPError",
    "ConvergenceError",
    "CorrelationFamily",
    "DesignError",
    "DomainError",
    "ExistenceError",
    "Homogeneous",
    "KernelSpec",
    "LogLinear",
    "NumericError",
    "ParameterError",
    "PointPattern",
    "ResourceError",
    "Window",
    "omega",
    "sample_dpp",
    "sample_poisson",
    "spectral_density",
    "stream",
]
