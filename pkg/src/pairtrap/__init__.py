"""Toolkit for simulating and analysing particle-pair creation in a trapped-ion oscillator."""

from .errors import PairtrapError

__all__ = ["PairtrapError"]
