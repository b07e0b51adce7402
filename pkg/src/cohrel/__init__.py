"""Reliability estimation for coherent systems from system-level failure data."""

__version__ = "0.1.0"
