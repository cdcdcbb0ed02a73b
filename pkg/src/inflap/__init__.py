"""inflap: finite-difference infinity Laplace solver, boundary-biased
tug-of-war simulator, and a quantitative study harness."""

__version__ = "0.1.0"

from ._kernels import USING_COMPILED

__all__ = ["USING_COMPILED", "__version__"]
