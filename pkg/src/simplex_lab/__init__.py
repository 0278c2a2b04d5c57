"""Simplex Multiplier Lab - numerical experiments with simplex multipliers.

Periodic grid evaluation of the multilinear simplex operators, the rooted-tree
symbol partitions behind them, discrete time-frequency model operators with
their size and energy functionals, and upper-triangular AKNS systems.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
