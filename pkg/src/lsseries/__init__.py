"""Least-squares series regression with pointwise and uniform inference."""

from .bases import Basis, BasisSpec, diagnostics, make_basis, orthonormalize
from .errors import SeriesError
from .functionals import FunctionalSpec, LoadingSet, build_loadings, sigma_theta_hat, theta_hat
from .inference import BandResult, pointwise_ci, uniform_band
from .numutil import Quadrature, RandomStream, gauss_legendre
from .regression import Dataset, FitResult, fit, weighted_fit

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "BasisSpec",
    "diagnostics",
    "make_basis",
    "orthonormalize",
    "SeriesError",
    "FunctionalSpec",
    "LoadingSet",
    "build_loadings",
    "sigma_theta_hat",
    "theta_hat",
    "BandResult",
    "pointwise_ci",
    "uniform_band",
    "Quadrature",
    "RandomStream",
    "gauss_legendre",
    "Dataset",
    "FitResult",
    "fit",
    "weighted_fit",
]
