"""Transverse entanglement of SPDC biphotons: analytic double-Gaussian results,
grid-based Gauss-sinc numerics, calibration of the sinc fit and a simulated
phase-metrology protocol."""

__version__ = "0.1.0"
