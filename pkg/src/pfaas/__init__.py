"""Discrete-event emulation of a serverless 5G control plane."""

__version__ = "0.1.0"
