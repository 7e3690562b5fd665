"""Packet-level wireless routing simulator with shortest-path, backpressure and
relational deep-RL routing policies."""

from .config import PRESETS, RLConfig, ScenarioConfig, build_simulation, get_preset
from .simcore import MetricsRecord, Simulation
from .topology import Topology, make_lattice, make_random_geometric

__version__ = "0.1.0"

__all__ = [
    "PRESETS", "RLConfig", "ScenarioConfig", "build_simulation", "get_preset",
    "MetricsRecord", "Simulation", "Topology", "make_lattice", "make_random_geometric",
]
