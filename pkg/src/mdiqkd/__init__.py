"""Post-processing, simulation and interference modelling for MDI-QKD experiments."""

__version__ = "0.1.0"
