"""Stochastic matrix product states for classical and quantum non-Markovian processes."""

from .channelcore import KrausFamily
from .smps import StochasticMPS

__all__ = ["KrausFamily", "StochasticMPS"]
__version__ = "0.1.0"
