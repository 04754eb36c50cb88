"""Figure rendering for sweep CSV files."""
from .reader import SchemaError, SweepTable, read_sweep
from .render import FigureSpec, figure_spec, render

__all__ = ["SchemaError", "SweepTable", "read_sweep", "FigureSpec",
           "figure_spec", "render"]
