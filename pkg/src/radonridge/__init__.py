"""Radon-domain calculus and TV-regularized shallow ReLU network fitting."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
