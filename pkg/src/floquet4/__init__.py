"""Spectral analysis of fourth-order periodic operators u'''' + (pu')' + qu."""

__version__ = "0.1.0"

from .coeffs import CoefficientSet, load_coeffs, preset  # noqa: E402
from .errors import FloquetError  # noqa: E402

__all__ = ["CoefficientSet", "FloquetError", "load_coeffs", "preset", "__version__"]
