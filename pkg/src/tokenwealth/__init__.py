"""Token-economy wealth dynamics: macro compartments, kinetic exchange models and inverse rate fitting."""

__version__ = "0.1.0"
