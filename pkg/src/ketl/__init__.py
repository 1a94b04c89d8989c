"""Workbench for linear-time epistemic temporal logic over interpreted systems."""

__version__ = "0.1.0"
