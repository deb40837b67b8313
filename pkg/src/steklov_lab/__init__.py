"""Steklov spectra, symbol identities, wave traces and boundary determination.

Modules
-------
symcalc
    Polyhomogeneous boundary symbols and closed-form DN symbol differences.
modelgeo
    Exact and ODE Steklov spectra of balls and cylinders.
tracelab
    Weyl fits, mollified wave traces, singularity detection, return-operator lab.
anosovgeo
    Closed geodesics and X-ray transform on a genus-2 hyperbolic surface.
recover
    Order-by-order recovery of boundary jets from geodesic invariants.
"""
from .errors import NumericalError, PreconditionError, StekLabError

__version__ = "0.1.0"
__all__ = ["NumericalError", "PreconditionError", "StekLabError", "__version__"]
