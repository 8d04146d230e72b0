"""Transient analysis, busy periods and convergence bounds for the M/G/inf queue."""

from .dist import (CATALOG, Erlang, Exponential, HyperExponential, Light, Lomax, RegularlyVarying,
                   ServiceModel, SubexponentialOther, WeibullHeavy, parse_dist)
from .transient import QueueParams

__version__ = "0.1.0"

__all__ = [
    "CATALOG", "Erlang", "Exponential", "HyperExponential", "Light", "Lomax", "QueueParams",
    "RegularlyVarying", "ServiceModel", "SubexponentialOther", "WeibullHeavy", "parse_dist",
]
