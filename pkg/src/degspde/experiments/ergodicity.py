"""
Two-chain comparison of long-time statistics.

Two ensembles started from different data are run side by side; the
time-averaged empirical law of each bounded observable after a burn-in is
compared through the two-sample Kolmogorov-Smirnov distance over a ladder of
doubling horizons.

With ``coupling="synchronous"`` the two chains use the same noise streams
(common random numbers), which removes most of the sampling noise from the
distance between the two laws; ``"independent"`` uses disjoint streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..solver import ModelParams, SolverConfig, Stepper, simulate
from .ensemble import DEFAULT_CHUNK, map_tasks, split_chunks
from .monitors import EnsembleStats, Functionals, MonitorConfig, MonitorObserver, MonitorSeries, energy_monitor, log_slope_per_doubling

ERGODIC_OBSERVABLES = ("sigmoid_h_norm", "smoothed_mass", "min_barrier_distance")

# functionals entering the boundedness check (signed or bounded ones excluded)
BUDGET_EXCLUDE = ("barrier_gap", "mass")


def observable_values(series: MonitorSeries, name: str) -> np.ndarray:
    """Bounded observables from sampled functionals, shape ``(n_times, B)``."""
    v = series.values
    if name == "sigmoid_h_norm":
        return 1.0 / (1.0 + np.exp(-v["h_norm"]))
    if name == "smoothed_mass":
        return np.tanh(v["mass"])
    if name == "min_barrier_distance":
        return v["barrier_gap"]
    raise ValueError(f"unknown observable {name!r}; choose from {ERGODIC_OBSERVABLES}")


def ks_null_band(n1: int, n2: int, level: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value for ``n1``, ``n2`` independent samples.

    Counting trajectories (not time samples) makes the band conservative for
    time-averaged laws.
    """
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n1 + n2) / (n1 * n2))


@dataclass
class ErgodicityReport:
    horizons: tuple
    burn_in: float
    observables: tuple
    ks: dict  # observable -> array over horizons
    null_band: float
    n_per_chain: int
    coupling: str
    stats: tuple  # EnsembleStats per chain
    budget_values: dict  # functional -> array (chain, horizon)
    budget_slopes: dict  # functional -> worst slope over chains
    series: tuple = ()
    lineage: dict = field(default_factory=dict)

    def ks_decreasing(self, name: str, last: int = 2) -> bool:
        k = self.ks[name][-(last + 1) :]
        return bool(np.all(np.diff(k) < 0))


def ergodicity_run(
    x1,
    x2,
    params: ModelParams,
    config: SolverConfig,
    observables: Sequence[str] = ERGODIC_OBSERVABLES,
    burn_in: float = 5.0,
    horizon: float | Sequence[float] = (25.0, 50.0, 100.0, 200.0),
    n_per_chain: int = 200,
    coupling: str = "synchronous",
    monitor: Optional[MonitorConfig] = None,
    chunk_size: int = DEFAULT_CHUNK,
    threads: Optional[int] = None,
    seed2: Optional[int] = None,
    keep_series: bool = False,
) -> ErgodicityReport:
    """Run both chains to the largest horizon and compare them on each horizon.

    Parameters
    ----------
    config : SolverConfig
        Discretisation; ``config.horizon`` is ignored.
    horizon : float or sequence of float
        Horizon ladder ``T_1 < T_2 < ...`` (typically doublings).
    coupling : {"synchronous", "independent"}
    seed2 : int, optional
        Seed of the second chain (default: the seed of ``config``).  With
        ``x1 == x2`` a different seed gives two independent samples of one law.
    """
    if coupling not in ("synchronous", "independent"):
        raise ValueError(f"unknown coupling {coupling!r}")
    horizons = tuple(sorted(np.atleast_1d(np.asarray(horizon, dtype=float)).tolist()))
    if horizons[0] <= burn_in:
        raise ValueError("every horizon must exceed the burn-in")
    for name in observables:
        if name not in ERGODIC_OBSERVABLES:
            raise ValueError(f"unknown observable {name!r}")
    monitor = (monitor or MonitorConfig()).resolved(params)
    T = horizons[-1]
    cfg1 = replace(config, horizon=T)
    cfg2 = replace(cfg1, seed=cfg1.seed if seed2 is None else int(seed2))
    st1, st2 = Stepper(params, cfg1), Stepper(params, cfg2)
    x1 = np.asarray(getattr(x1, "coeffs", x1), dtype=float)
    x2 = np.asarray(getattr(x2, "coeffs", x2), dtype=float)
    traj1 = np.arange(n_per_chain)
    traj2 = traj1 if coupling == "synchronous" else traj1 + n_per_chain
    tasks = [(0, c) for c in split_chunks(traj1, chunk_size)] + [(1, c) for c in split_chunks(traj2, chunk_size)]
    chains = ((x1, cfg1, st1), (x2, cfg2, st2))

    def run(task):
        which, chunk = task
        x, cfg, st = chains[which]
        obs = MonitorObserver(Functionals(st, monitor), monitor.stride, cfg.dt, include_initial=np.broadcast_to(x, (chunk.shape[0], x.shape[0])))
        rec = simulate(x, params, cfg, chunk, stepper=st, observer=obs, store=False)
        return which, obs.series(), rec.lineage

    results = map_tasks(run, tasks, threads)
    series = tuple(MonitorSeries.concat([s for w, s, _ in results if w == c]) for c in (0, 1))
    times = series[0].times
    ks = {}
    for name in observables:
        vals = [observable_values(s, name) for s in series]
        out = []
        for Th in horizons:
            sel = (times > burn_in + 1e-12) & (times <= Th + 1e-12)
            a, b = vals[0][sel].ravel(), vals[1][sel].ravel()
            out.append(float(stats.ks_2samp(a, b, method="asymp").statistic))
        ks[name] = np.asarray(out)
    chain_stats = tuple(energy_monitor(s, monitor, params, stepper=st, x0=x) for s, st, x in zip(series, (st1, st2), (x1, x2)))
    budget_values, budget_slopes = _budgets(chain_stats, horizons)
    lineage = {
        "generator": "philox4x64",
        "chain1": {"seed": cfg1.seed, "trajectories": [int(traj1[0]), int(traj1[-1])]},
        "chain2": {"seed": cfg2.seed, "trajectories": [int(traj2[0]), int(traj2[-1])]},
    }
    return ErgodicityReport(
        horizons=horizons,
        burn_in=burn_in,
        observables=tuple(observables),
        ks=ks,
        null_band=ks_null_band(n_per_chain, n_per_chain),
        n_per_chain=n_per_chain,
        coupling=coupling,
        stats=chain_stats,
        budget_values=budget_values,
        budget_slopes=budget_slopes,
        series=series if keep_series else (),
        lineage=lineage,
    )


def _budgets(chain_stats: Sequence[EnsembleStats], horizons: Sequence[float]):
    """Per-horizon sizes of the monitored functionals and their log slope per doubling.

    Pointwise functionals use ``sup_{t <= T} E f(X(t))``; the gradient-weighted
    terms use the time average ``(1/T) int_0^T E f ds``.
    """
    values, slopes = {}, {}
    for name in chain_stats[0].names:
        if name in BUDGET_EXCLUDE:
            continue
        rows = []
        for st in chain_stats:
            if name in st.integrated:
                integ, times = st.integrated[name], st.times
                rows.append([float(np.interp(Th, times, integ)) / Th for Th in horizons])
            else:
                rows.append([st.window_sup(name, Th) for Th in horizons])
        arr = np.asarray(rows)
        values[name] = arr
        slopes[name] = max(log_slope_per_doubling(horizons, r) for r in arr) if np.all(arr > 0) else math.nan
    return values, slopes
