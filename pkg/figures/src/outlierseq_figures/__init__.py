"""Figures for simulation results: error-rate curves and convergence profiles.

Couples to the detection package only through its results CSV schema; any
file with the same columns renders identically.
"""

from .render import FIGURE_IDS, FigureSpec, RenderResult, SchemaError, render

__version__ = "0.1.0"

__all__ = [
    "FIGURE_IDS",
    "FigureSpec",
    "RenderResult",
    "SchemaError",
    "render",
    "__version__",
]
