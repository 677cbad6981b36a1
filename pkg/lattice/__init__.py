"""Spectra of a 2D mass-spring lattice with a line defect and a point defect."""

__version__ = "0.1.0"
