"""Exact propagator, wave functions and geometric phases of the dual damped oscillator."""

from .model import BatemanParams, make_params

__version__ = "0.1.0"

__all__ = ["BatemanParams", "make_params", "__version__"]
