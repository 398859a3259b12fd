"""Numerical toolkit for chordal Schramm-Loewner evolution.

Slit-map chains and reverse flows, martingale ensembles, the radial
diffusion of the derivative, natural-parametrization candidates and
dimension estimators.
"""

from .params import DomainError, SleParams, derive_exponents

__version__ = "0.1.0"

__all__ = ["DomainError", "SleParams", "derive_exponents", "__version__"]
