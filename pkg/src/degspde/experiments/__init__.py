"""Verification harnesses built on the solver."""

from .bel import BELReport, Observable, bel_estimate
from .ensemble import map_chunks, map_tasks, split_chunks
from .ergodicity import ErgodicityReport, ergodicity_run, ks_null_band
from .irreducibility import IrreducibilityReport, fit_decay_rate, irreducibility_run, wilson_interval
from .monitors import EnsembleStats, Functionals, MonitorConfig, MonitorObserver, MonitorSeries, energy_monitor, lyapunov_check
from .separation import SeparationReport, separation_run, separation_stats

__all__ = [
    "BELReport",
    "Observable",
    "bel_estimate",
    "map_chunks",
    "map_tasks",
    "split_chunks",
    "ErgodicityReport",
    "ergodicity_run",
    "ks_null_band",
    "IrreducibilityReport",
    "fit_decay_rate",
    "irreducibility_run",
    "wilson_interval",
    "EnsembleStats",
    "Functionals",
    "MonitorConfig",
    "MonitorObserver",
    "MonitorSeries",
    "energy_monitor",
    "lyapunov_check",
    "SeparationReport",
    "separation_run",
    "separation_stats",
]
