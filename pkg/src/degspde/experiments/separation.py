"""
Per-trajectory distance to the barriers.

For each trajectory the separation layer is ``1 - sup |X|`` over all steps
and all nodes of the dealiased grid.  Its empirical distribution shows
whether a common layer exists for all trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..solver import ModelParams, SolverConfig, Stepper, TrajectoryRecord, simulate
from .ensemble import DEFAULT_CHUNK, map_chunks
from .irreducibility import wilson_interval

LADDER = (0.5, 0.2, 0.1, 0.05)


@dataclass
class SeparationReport:
    layers: np.ndarray  # one entry per trajectory
    ladder: tuple
    exceedance: dict  # threshold L -> P(sup|X| > 1 - L)
    wilson: dict
    max_sup: float
    excursion_budget: float
    final_exceedance: dict = field(default_factory=dict)
    lineage: dict = field(default_factory=dict)

    @property
    def n_trajectories(self) -> int:
        return int(self.layers.shape[0])

    @property
    def within_budget(self) -> bool:
        """Every trajectory satisfies ``sup |X| < 1 + 5 eps``."""
        return bool(self.max_sup < self.excursion_budget)

    def quantiles(self, q: Sequence[float] = (0.0, 0.01, 0.1, 0.5, 0.9, 1.0)) -> dict:
        return {float(p): float(np.quantile(self.layers, p)) for p in q}


def separation_stats(
    ensemble,
    params: ModelParams,
    ladder: Sequence[float] = LADDER,
    final_states: Optional[np.ndarray] = None,
    stepper: Optional[Stepper] = None,
) -> SeparationReport:
    """Empirical distribution of the layer and exceedance probabilities.

    Parameters
    ----------
    ensemble : TrajectoryRecord, sequence of TrajectoryRecord, or array
        Records (their running ``sup_abs`` is used, which covers every step)
        or an array of per-trajectory sup-norms.
    final_states : array_like, optional
        States at the final time for the fixed-time exceedance
        ``P(||X(t)||_{C^0} > 1 - L)`` (needs ``stepper``).
    """
    if isinstance(ensemble, TrajectoryRecord):
        ensemble = [ensemble]
    if isinstance(ensemble, (list, tuple)) and ensemble and isinstance(ensemble[0], TrajectoryRecord):
        sups = np.concatenate([r.sup_abs for r in ensemble])
    else:
        sups = np.asarray(ensemble, dtype=float).ravel()
    layers = 1.0 - sups
    n = sups.shape[0]
    exc, wil = {}, {}
    for L in ladder:
        k = int(np.count_nonzero(sups > 1.0 - L))
        exc[float(L)] = k / n
        wil[float(L)] = wilson_interval(k, n)
    final = {}
    if final_states is not None:
        if stepper is None:
            raise ValueError("final-time exceedance needs the stepper")
        fs = np.max(np.abs(stepper.grid_values(np.atleast_2d(final_states))), axis=-1)
        final = {float(L): float(np.mean(fs > 1.0 - L)) for L in ladder}
    return SeparationReport(
        layers=layers,
        ladder=tuple(float(L) for L in ladder),
        exceedance=exc,
        wilson=wil,
        max_sup=float(np.max(sups)),
        excursion_budget=1.0 + 5.0 * params.epsilon,
        final_exceedance=final,
    )


def separation_run(
    x,
    params: ModelParams,
    config: SolverConfig,
    n_trajectories: int,
    ladder: Sequence[float] = LADDER,
    chunk_size: int = DEFAULT_CHUNK,
    threads: Optional[int] = None,
) -> SeparationReport:
    """Simulate an ensemble to ``config.horizon`` and collect its separation statistics."""
    st = Stepper(params, config)
    x = np.asarray(getattr(x, "coeffs", x), dtype=float)

    def run(chunk):
        rec = simulate(x, params, config, chunk, stepper=st, store=False)
        return rec.sup_abs, rec.final

    parts = map_chunks(run, np.arange(n_trajectories), chunk_size=chunk_size, threads=threads)
    sups = np.concatenate([p[0] for p in parts])
    finals = np.concatenate([p[1] for p in parts])
    rep = separation_stats(sups, params, ladder, final_states=finals, stepper=st)
    rep.lineage = {"generator": "philox4x64", "seed": config.seed, "trajectories": [0, n_trajectories - 1]}
    return rep
