"""Figure generation from experiment run directories.

These scripts consume only the versioned CSV/JSON files a run directory
contains; they never import the simulator and never write into run
directories.
"""

__version__ = "0.1.0"

from .figspec import FigureSpec, SchemaError, plot

__all__ = ["FigureSpec", "SchemaError", "plot"]
