"""Figure rendering for cascade simulation CSV outputs."""

from .figures import KINDS, FigureSpec, render
from .tables import Table, parse_table

__version__ = "0.1.0"

__all__ = ["FigureSpec", "KINDS", "Table", "parse_table", "render", "__version__"]
