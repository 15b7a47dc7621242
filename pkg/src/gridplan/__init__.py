"""Microgrid design-and-operation planning: scenario generation, MILP formulation and solver."""

__version__ = "0.1.0"
