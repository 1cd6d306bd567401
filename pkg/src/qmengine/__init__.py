"""Bipartite quantum measurement engines with thermodynamically consistent measurements."""

from qmengine.engine import CycleConfig, EnergyLedger, run_cycle
from qmengine.measurement import CorrelationScheme, Scheme
from qmengine.model import DensityOp, PointerSpec, SystemSpec, Topology
from qmengine.scenario import TcmeBathConfig, TwoQubitConfig, sweep

__all__ = [
    "CorrelationScheme",
    "CycleConfig",
    "DensityOp",
    "EnergyLedger",
    "PointerSpec",
    "Scheme",
    "SystemSpec",
    "TcmeBathConfig",
    "Topology",
    "TwoQubitConfig",
    "run_cycle",
    "sweep",
]

__version__ = "0.1.0"
