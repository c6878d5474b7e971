"""Discrete variational integrators and optimal control on matrix Lie groups."""

from .lie import SE3, SO3, AbelianGroup, QuadraticGroup, ad, ad_star, Ad, Ad_star
from .retractions import Cayley, TruncatedExp, get_retraction

__version__ = "0.1.0"

__all__ = [
    "SE3", "SO3", "AbelianGroup", "QuadraticGroup", "ad", "ad_star", "Ad", "Ad_star",
    "Cayley", "TruncatedExp", "get_retraction",
]
