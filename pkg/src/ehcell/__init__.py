"""Energy-harvesting small cell with proactive caching and push."""
from .engine import Metrics, Outcome, PeriodReport, Simulation, WorldConfig, run

__version__ = "0.1.0"
