"""Deterministic discrete-event simulator of multitier service migration in MEC.

Vehicles travel a road network through a hexagonal base-station lattice while
a pre-copy migration engine moves their containerized services between local
and regional edge servers under five selectable strategies, reporting
per-migration network traffic and service downtime.
"""

from .config import ScenarioConfig, load_config, resolve_config
from .prediction import StrategyKind
from .report import RunReport, aggregate
from .simcore import run, sweep

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig",
    "StrategyKind",
    "RunReport",
    "aggregate",
    "load_config",
    "resolve_config",
    "run",
    "sweep",
    "__version__",
]
