"""Dirac constraint analysis and quantization of superconducting-circuit Lagrangians."""

from .analysis import analyze, report
from .expr import Expression, PhaseSpaceChart, poisson_bracket
from .parser import canonicalize, parse

__all__ = ["Expression", "PhaseSpaceChart", "analyze", "canonicalize", "parse", "poisson_bracket", "report"]
__version__ = "0.1.0"
