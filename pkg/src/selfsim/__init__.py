"""Numerical toolkit for self-similar flows built from Riesz products.

Submodules
----------
measures   grid and atomic measures on the circle, the line and R*_+ (log chart)
riesz      Riesz products: signed decompositions, Fourier coefficients, criteria
lift       circle -> line -> symmetric measure on R* and membership evidence
gaussian   exp' sigma, covariance, process simulation and mixing diagnostics
poisson    Poisson suspension of the product flow and its scaling maps
cli        batch front end (``selfsim --config ...``)
"""

from ._kernels import BACKEND
from .errors import DomainError, NumericalGuardError

__version__ = "0.1.0"
__all__ = ["BACKEND", "DomainError", "NumericalGuardError", "__version__"]
