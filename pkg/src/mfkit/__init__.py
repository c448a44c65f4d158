"""mfkit: multifractal analysis of measures and time series."""
from .core import (DegenerateError, DomainError, InsufficientRangeError, MfError, MfSpectrum,
                   ScaleGrid, ScalingFit, Series, ValidationError, build_profile, fit_loglog,
                   legendre, make_qgrid, make_scales)

__version__ = "0.1.0"

__all__ = ["DegenerateError", "DomainError", "InsufficientRangeError", "MfError", "MfSpectrum",
           "ScaleGrid", "ScalingFit", "Series", "ValidationError", "build_profile", "fit_loglog",
           "legendre", "make_qgrid", "make_scales", "__version__"]
