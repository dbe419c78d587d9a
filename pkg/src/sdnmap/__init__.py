"""Batched flow-rule installation and weight-driven remapping for virtual
network embedding on a software-defined substrate."""

from .config import load_config
from .simulator import SimConfig, Simulation, Strategy, run

__all__ = ["SimConfig", "Simulation", "Strategy", "load_config", "run"]
__version__ = "0.1.0"
