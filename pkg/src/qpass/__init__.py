"""Bell-pair quantum-password authentication: simulation and security analysis."""

__version__ = "0.1.0"
