"""Companion plotting package for dvrlab: renders multi-panel suboptimality
figures from trace CSV files, consuming only the documented CSV schema."""

from . import cli
from .figure import AXIS_CHOICES, FigureSpec, PlotSpecError, load_spec, render

__all__ = ["AXIS_CHOICES", "FigureSpec", "PlotSpecError", "cli", "load_spec",
           "render"]
