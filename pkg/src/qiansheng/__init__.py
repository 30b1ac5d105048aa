"""Pseudo-spectral simulation and coefficient analysis for the inertial Qian-Sheng Q-tensor model."""

__version__ = "0.1.0"
