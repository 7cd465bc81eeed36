"""
Energy functionals along ensembles and their time statistics.

Functionals are evaluated on the dealiased grid with the regularised
potentials of the run; the reference budget ``1 + ||Psi_gamma(x)||_{L^1}``
uses the exact potential at the initial datum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..potentials import potential_table, psi0
from ..solver import ModelParams, Stepper, TrajectoryRecord
from ..spectral import Basis, sobolev_norm_coeffs

QUANTILES = (0.1, 0.5, 0.9)


@dataclass(frozen=True)
class MonitorConfig:
    """Reporting knobs of the energy monitors.

    Parameters
    ----------
    moments : tuple of float
        Orders ``l >= 2`` of the reported moments ``E ||X||_H^l``.
    gammas : tuple of float
        Exponents of the monitored potentials; empty means ``(params.gamma,)``.
    sobolev : tuple of float
        Indices ``xi`` of the reported norms ``||(I+A)^xi X||_H``; empty means
        ``(sigma, delta)``.
    stride : int
        Sample every ``stride`` steps.
    """

    moments: tuple = (2.0, 4.0)
    gammas: tuple = ()
    sobolev: tuple = ()
    stride: int = 100

    def __post_init__(self):
        if any(l < 2 for l in self.moments):
            raise ValueError("moment orders must be >= 2")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def resolved(self, params: ModelParams) -> "MonitorConfig":
        return MonitorConfig(
            moments=tuple(self.moments),
            gammas=tuple(self.gammas) or (params.gamma,),
            sobolev=tuple(self.sobolev) or (params.sigma, params.delta),
            stride=self.stride,
        )


def mode_integrals(basis: Basis) -> np.ndarray:
    """``int_0^L e_k dx`` for each basis function."""
    L = basis.domain_length
    k = np.arange(1, basis.n_modes + 1, dtype=float)
    if basis.bc == "dirichlet":
        w = k * math.pi / L
        return math.sqrt(2.0 / L) * (1.0 - np.cos(w * L)) / w
    out = np.zeros(basis.n_modes)
    out[0] = math.sqrt(L)
    return out


class Functionals:
    """Pointwise-in-time functionals of a batch of states.

    ``values(X)`` returns a dict of arrays of shape ``(B,)``.
    """

    def __init__(self, stepper: Stepper, config: MonitorConfig):
        p = stepper.params
        self.config = config.resolved(p)
        self.stepper = stepper
        self.basis = stepper.basis
        eps = p.epsilon
        self.tables = {g: (potential_table(g, eps), potential_table(0.5 * g, eps)) for g in self.config.gammas}
        self.beta_table = stepper.drift_table
        grid = self.basis.grid
        self.D_d = np.ascontiguousarray(self.basis.eigenfunction_derivatives(grid.nodes).T)
        self.mass = mode_integrals(self.basis)
        self.shifted = self.basis.shifted_eigenvalues()

    def names(self) -> list[str]:
        out = ["h_norm", "v_norm", "sup_norm", "barrier_gap", "mass"]
        out += [f"h_norm_pow{_fmt(l)}" for l in self.config.moments]
        out += [f"sobolev_{_fmt(s)}" for s in self.config.sobolev]
        for g in self.config.gammas:
            out += [f"psi_l1_g{_fmt(g)}", f"grad_weighted_g{_fmt(g)}", f"cross_g{_fmt(g)}"]
        return out

    def values(self, X: np.ndarray) -> dict:
        X = np.atleast_2d(X)
        w = self.basis.grid.weight
        xs = X @ self.stepper.S_d
        h = np.sqrt(np.sum(X * X, axis=-1))
        sup = np.max(np.abs(xs), axis=-1)
        out = {
            "h_norm": h,
            "v_norm": np.sqrt(np.sum(self.shifted * X * X, axis=-1)),
            "sup_norm": sup,
            "barrier_gap": 1.0 - sup,
            "mass": X @ self.mass,
        }
        for l in self.config.moments:
            out[f"h_norm_pow{_fmt(l)}"] = h**l
        for s in self.config.sobolev:
            out[f"sobolev_{_fmt(s)}"] = sobolev_norm_coeffs(X, self.basis, s)
        dpsi_beta = self.beta_table.dpsi(xs)
        grad = X @ self.D_d
        for g, (tab, half) in self.tables.items():
            p0, p1 = tab.evaluate(xs, order=(0, 1))
            out[f"psi_l1_g{_fmt(g)}"] = w * np.sum(p0, axis=-1)
            out[f"grad_weighted_g{_fmt(g)}"] = w * np.sum((half.d2psi(xs) * grad) ** 2, axis=-1)
            out[f"cross_g{_fmt(g)}"] = w * np.sum(p1 * dpsi_beta, axis=-1)
        return out


def _fmt(v: float) -> str:
    return repr(float(v)).replace(".0", "") if float(v).is_integer() else repr(float(v))


class MonitorObserver:
    """Observer for :func:`degspde.solver.simulate` sampling functionals every ``stride`` steps."""

    def __init__(self, functionals: Functionals, stride: Optional[int] = None, dt: float = 1.0, include_initial: Optional[np.ndarray] = None):
        self.functionals = functionals
        self.stride = stride or functionals.config.stride
        self.dt = dt
        self.times: list[float] = []
        self.samples: list[dict] = []
        if include_initial is not None:
            self(0, include_initial)

    def __call__(self, step: int, X: np.ndarray) -> None:
        if step % self.stride:
            return
        self.times.append(step * self.dt)
        self.samples.append(self.functionals.values(X))

    def series(self) -> "MonitorSeries":
        names = list(self.samples[0]) if self.samples else []
        return MonitorSeries(
            times=np.asarray(self.times),
            values={k: np.stack([s[k] for s in self.samples]) for k in names},
        )


@dataclass
class MonitorSeries:
    """Sampled functionals: ``values[name]`` has shape ``(n_times, B)``."""

    times: np.ndarray
    values: dict

    @staticmethod
    def concat(parts: Sequence["MonitorSeries"]) -> "MonitorSeries":
        """Join chunks along the trajectory axis (in the given order)."""
        first = parts[0]
        for p in parts[1:]:
            if p.times.shape != first.times.shape or not np.array_equal(p.times, first.times):
                raise ValueError("inconsistent ensemble: sample times differ between chunks")
        return MonitorSeries(first.times, {k: np.concatenate([p.values[k] for p in parts], axis=1) for k in first.values})

    def select(self, columns) -> "MonitorSeries":
        return MonitorSeries(self.times, {k: v[:, columns] for k, v in self.values.items()})


@dataclass
class EnsembleStats:
    """Per-time ensemble means and quantiles of the monitored functionals.

    ``budget`` is ``1 + ||Psi_gamma(x)||_{L^1}`` at the initial data (largest
    over the ensemble) and ``ratios[name]`` is ``sup_t mean / budget``.
    ``integrated`` holds the running time integral of the mean of each
    gradient-weighted term.
    """

    times: np.ndarray
    mean: dict
    quantiles: dict
    integrated: dict
    n_trajectories: int
    budget: float
    ratios: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.mean.items():
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite ensemble statistic {k}")

    @property
    def names(self) -> list[str]:
        return list(self.mean)

    def window_average(self, name: str, t0: float, t1: float) -> float:
        sel = (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)
        return float(np.mean(self.mean[name][sel]))

    def window_sup(self, name: str, t1: float) -> float:
        return float(np.max(self.mean[name][self.times <= t1 + 1e-12]))


def initial_budget(x0: np.ndarray, stepper: Stepper, gamma: float) -> float:
    """``1 + ||Psi_gamma(x)||_{L^1}`` with the exact potential (largest over a batch)."""
    xs = np.atleast_2d(x0) @ stepper.S_d
    if np.any(np.abs(xs) >= 1.0):
        return math.inf
    return 1.0 + float(np.max(stepper.basis.grid.weight * np.sum(psi0(gamma, xs), axis=-1)))


def energy_monitor(
    ensemble,
    config: MonitorConfig,
    params: ModelParams,
    stepper: Optional[Stepper] = None,
    x0: Optional[np.ndarray] = None,
) -> EnsembleStats:
    """Ensemble statistics of the monitored functionals.

    Parameters
    ----------
    ensemble : MonitorSeries, TrajectoryRecord or sequence of either
        Either pre-sampled functionals or stored states, joined along the
        trajectory axis in the given order.
    stepper : Stepper, optional
        Needed when states have to be evaluated; built from ``params`` with the
        mode count of the states otherwise.
    x0 : array_like, optional
        Initial data for the budget; defaults to the first stored state.
    """
    from ..solver import SolverConfig

    parts = list(ensemble) if isinstance(ensemble, (list, tuple)) else [ensemble]
    if not parts:
        raise ValueError("empty ensemble")
    cfg = config.resolved(params)
    series = []
    for part in parts:
        if isinstance(part, MonitorSeries):
            series.append(part)
            continue
        if not isinstance(part, TrajectoryRecord):
            raise TypeError("ensemble members must be MonitorSeries or TrajectoryRecord")
        n = part.states.shape[-1]
        if stepper is None:
            stepper = Stepper(params, SolverConfig(n_modes=n))
        if stepper.config.n_modes != n:
            raise ValueError("inconsistent ensemble: mode counts differ")
        fun = Functionals(stepper, cfg)
        vals = [fun.values(s) for s in part.states]
        series.append(MonitorSeries(part.times, {k: np.stack([v[k] for v in vals]) for k in vals[0]}))
        if x0 is None:
            x0 = part.states[0]
    s = MonitorSeries.concat(series)
    mean = {k: np.mean(v, axis=1) for k, v in s.values.items()}
    quant = {k: np.quantile(v, QUANTILES, axis=1).T for k, v in s.values.items()}
    integrated = {}
    for k in mean:
        if k.startswith("grad_weighted"):
            dt = np.diff(s.times)
            integrated[k] = np.concatenate([[0.0], np.cumsum(0.5 * dt * (mean[k][1:] + mean[k][:-1]))])
    budget = math.nan
    if x0 is not None and stepper is not None:
        budget = initial_budget(x0, stepper, cfg.gammas[0])
    n_traj = next(iter(s.values.values())).shape[1]
    stats = EnsembleStats(s.times, mean, quant, integrated, n_traj, budget)
    if math.isfinite(budget):
        stats.ratios = {k: float(np.max(np.abs(v))) / budget for k, v in mean.items()}
    return stats


def log_slope_per_doubling(horizons: Iterable[float], values: Iterable[float]) -> float:
    """Least-squares slope of ``log(value)`` against ``log2(horizon)``."""
    T = np.log2(np.asarray(list(horizons), dtype=float))
    v = np.asarray(list(values), dtype=float)
    if np.any(v <= 0):
        raise ValueError("log slope needs positive values")
    return float(np.polyfit(T, np.log(v), 1)[0])


def lyapunov_check(stepper: Stepper, x0: np.ndarray, n_steps: int) -> tuple[bool, float]:
    """Deterministic run (noise off): is the discrete energy non-increasing at every step?

    Returns ``(ok, worst increase)``; increases below ``1e-12`` relative are
    treated as rounding.  ``stepper`` must have been built with ``noise_mode="off"``.
    """
    if stepper.config.noise_mode != "off":
        raise ValueError("the Lyapunov check runs without noise")
    X = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    zero = np.zeros_like(X)
    e_prev = stepper.energy(X)
    worst = -math.inf
    for _ in range(n_steps):
        X, _, _ = stepper.step(X, zero)
        e = stepper.energy(X)
        worst = max(worst, float(np.max((e - e_prev) / np.maximum(1.0, np.abs(e_prev)))))
        e_prev = e
    return worst <= 1e-12, worst
