"""Matrix-element amplification with dynamical decoupling: simulation and estimation tools."""

__version__ = "0.1.0"
