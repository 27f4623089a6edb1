"""Configuration files, parameter sweeps, result files and the command line."""
from .config import load_config, sweep_spec, world_config
from .output import emit_csv, emit_plot, read_csv
from .sweep import SweepCell, SweepResult, SweepSpec, run_sweep
