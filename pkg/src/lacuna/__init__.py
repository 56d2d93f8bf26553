"""Numerical toolkit for directional Hilbert transforms and maximal operators
over lacunary direction sets on periodic grids."""

from . import decomposition, directions, grid, normlab, operators, symbols, weights
from .directions import DirectionSet, carbery_set, lacunary2d, nsw_set, uniform_set
from .grid import Field, Grid, Symbol, make_grid

__version__ = "0.1.0"

__all__ = [
    "decomposition", "directions", "grid", "normlab", "operators", "symbols", "weights",
    "DirectionSet", "carbery_set", "lacunary2d", "nsw_set", "uniform_set",
    "Field", "Grid", "Symbol", "make_grid",
]
