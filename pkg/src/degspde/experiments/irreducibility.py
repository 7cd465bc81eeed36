"""
Controlled approach to a target state.

The state is run freely on ``[0, tau]`` and then with the extra drift
``kappa (Z - a~)``, ``kappa = M/(t - tau)``, on ``[tau, t]``, where ``a~`` is
the projection of the target ``a`` onto the lowest ``N/2`` modes.  The decay
of ``E ||Z(s) - a~||^2_H`` and the probability of ending within ``r`` of ``a``
in the ``V_{2 delta}`` norm are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from ..solver import DriftConfig, ModelParams, SolverConfig, Stepper, simulate
from ..spectral import sobolev_norm_coeffs
from .ensemble import DEFAULT_CHUNK, map_chunks

# the drifted phase draws from a separate stream family
DRIFT_SEED_OFFSET = 1


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def smooth_target(a: np.ndarray, n_keep: Optional[int] = None) -> np.ndarray:
    """Keep the lowest ``n_keep`` (default ``N // 2``) modes of ``a``."""
    a = np.asarray(a, dtype=float)
    n_keep = a.shape[-1] // 2 if n_keep is None else n_keep
    out = np.zeros_like(a)
    out[..., :n_keep] = a[..., :n_keep]
    return out


@dataclass
class RateFit:
    rate: float
    expected: float
    rel_error: float
    plateau: float
    window: tuple  # span where the transient exceeds ten times the plateau
    n_points: int


def fit_decay_rate(times: np.ndarray, mean_sq: np.ndarray, expected: float) -> RateFit:
    """Exponential rate of ``||Z - a~||`` from the ensemble mean square.

    Fits ``E(s) = A exp(-2 k (s - s0)) + P`` (``P >= 0`` is the noise
    plateau) by least squares on ``log E`` and returns ``k``, the amplitude
    rate; the mean square itself decays at ``2 k``.
    """
    times = np.asarray(times, dtype=float)
    E = np.asarray(mean_sq, dtype=float)
    if np.any(E <= 0):
        raise ValueError("mean square must be positive")
    s = times - times[0]
    logE = np.log(E)
    # initial guess from the first e-folding
    k0 = max(1e-6, -0.5 * np.polyfit(s[: max(3, E.shape[0] // 10)], logE[: max(3, E.shape[0] // 10)], 1)[0])
    p0 = max(E.min() * 0.5, 1e-300)

    def resid(theta):
        logA, k, logP = theta
        return np.logaddexp(logA - 2.0 * k * s, logP) - logE

    sol = optimize.least_squares(resid, [logE[0], k0, math.log(p0)], method="lm", xtol=1e-14, ftol=1e-14)
    logA, k, logP = sol.x
    plateau = float(math.exp(logP))
    above = E > 10.0 * plateau
    stop = int(np.argmin(above)) if not above.all() else E.shape[0]
    rate = float(k)
    return RateFit(rate, expected, abs(rate - expected) / expected, plateau, (float(times[0]), float(times[max(stop, 1) - 1])), max(stop, 1))


@dataclass
class IrreducibilityReport:
    gains: tuple
    rates: dict
    hit_successes: dict
    hit_probability: dict
    wilson: dict
    n_samples: int
    target_error: float
    r: float
    times: np.ndarray
    mean_sq: dict
    lineage: dict = field(default_factory=dict)


def irreducibility_run(
    x,
    a,
    t: float,
    tau: float,
    M_gain: Sequence[float] | float,
    r: float,
    params: ModelParams,
    n_samples: int,
    n_modes: int = 32,
    dt_free: float = 1e-3,
    dt_drift: float = 1e-4,
    seed: int = 0,
    store_stride: int = 10,
    chunk_size: int = DEFAULT_CHUNK,
    threads: Optional[int] = None,
    test_mode: Optional[str] = None,
) -> IrreducibilityReport:
    """Run the free phase on ``[0, tau]`` and the drifted phase on ``[tau, t]``.

    Parameters
    ----------
    x, a : array_like
        Initial datum and target (coefficients).
    M_gain : float or sequence of float
        Gains ``M``; ``0`` gives the plain dynamics.
    test_mode : {None, "drift_only"}
        ``"drift_only"`` switches off noise, potential and ``A`` in both
        phases, leaving the scalar recursion of the extra drift.
    """
    if not 0.0 < tau < t:
        raise ValueError("need 0 < tau < t")
    gains = tuple(np.atleast_1d(np.asarray(M_gain, dtype=float)).tolist())
    x = np.asarray(getattr(x, "coeffs", x), dtype=float)
    a = np.asarray(getattr(a, "coeffs", a), dtype=float)
    a_s = smooth_target(a)
    delta = params.delta
    modes = {}
    if test_mode == "drift_only":
        modes = dict(drift_mode="off", noise_mode="off", linear_mode="off")
    elif test_mode is not None:
        raise ValueError(f"unknown test mode {test_mode!r}")
    free_cfg = SolverConfig(n_modes=n_modes, dt=dt_free, horizon=tau, seed=seed, **modes)
    free_st = Stepper(params, free_cfg)
    target_error = float(sobolev_norm_coeffs(a - a_s, free_st.basis, delta))
    if target_error >= 0.5 * r:
        raise ValueError(f"||a - a~||_V2delta = {target_error:.3g} is not below r/2")
    horizon = t - tau
    n_drift = int(round(horizon / dt_drift))
    cfgs = {}
    for M in gains:
        drift = DriftConfig(M, 0.0, horizon, a_s) if M > 0 else None
        cfg = SolverConfig(n_modes=n_modes, dt=dt_drift, horizon=horizon, seed=seed + DRIFT_SEED_OFFSET, store_stride=store_stride, drift=drift, **modes)
        cfgs[M] = (cfg, Stepper(params, cfg))

    def run(chunk):
        Xtau = simulate(x, params, free_cfg, chunk, stepper=free_st, store=False).final
        out = {}
        for M, (cfg, st) in cfgs.items():
            rec = simulate(Xtau, params, cfg, chunk, stepper=st, n_steps=n_drift)
            diff = rec.states - a_s
            sq = np.sum(diff * diff, axis=-1)  # (n_store, B)
            dist = sobolev_norm_coeffs(rec.final - a, st.basis, delta)
            out[M] = (rec.times, sq, dist)
        return out

    parts = map_chunks(run, np.arange(n_samples), chunk_size=chunk_size, threads=threads)
    times = parts[0][gains[0]][0] + tau
    rates, succ, prob, wil, msq = {}, {}, {}, {}, {}
    for M in gains:
        sq = np.concatenate([p[M][1] for p in parts], axis=1)
        dist = np.concatenate([p[M][2] for p in parts])
        msq[M] = np.mean(sq, axis=1)
        k = int(np.count_nonzero(dist < r))
        succ[M] = k
        prob[M] = k / n_samples
        wil[M] = wilson_interval(k, n_samples)
        if M > 0:
            rates[M] = fit_decay_rate(times, msq[M], M / horizon)
    lineage = {
        "free_phase_seed": seed,
        "drift_phase_seed": seed + DRIFT_SEED_OFFSET,
        "trajectories": f"0..{n_samples - 1}",
        "generator": "philox4x64",
    }
    return IrreducibilityReport(gains, rates, succ, prob, wil, n_samples, target_error, r, times, msq, lineage)


def parabola_target(basis, height: float = 0.5) -> np.ndarray:
    """Coefficients of ``height * 4 x (L - x) / L^2`` (peak ``height`` at the midpoint)."""
    grid = basis.grid
    L = basis.domain_length
    vals = height * 4.0 * grid.nodes * (L - grid.nodes) / (L * L)
    return grid.analyze(vals)
