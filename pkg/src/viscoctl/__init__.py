"""Viscoelastic manipulation stack: 3D PDE plant, adaptive identification,
admittance outer loop and backstepping boundary control."""

__version__ = "0.1.0"
