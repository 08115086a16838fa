"""UAV-assisted edge computing simulator and multi-objective policy training."""

__version__ = "0.1.0"
