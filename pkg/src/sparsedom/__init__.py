"""Dyadic decompositions, Fourier multiplier pieces and sparse forms on periodic grids."""

from .dyadic_core import DyadicCube, GridFunction, lp_norm
from .multiplier_ops import MultiplierSymbol, parse_symbol
from .norms_sparse import NormEstimate, mpq_norm, sparse_form

__all__ = ["DyadicCube", "GridFunction", "lp_norm", "MultiplierSymbol", "parse_symbol", "NormEstimate", "mpq_norm", "sparse_form"]
