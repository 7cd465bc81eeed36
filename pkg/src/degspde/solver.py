"""
Time stepping for the regularised equation, its tangent and the drifted variant.

One step of size ``dt`` is the Lie splitting

1. noise (explicit, Ito): ``X+ = X + P_N[m_{alpha/2,eps}(X) (I+A)^{-delta} dW]``;
2. potential (pointwise implicit): on the dealiased grid solve
   ``r + dt Psi'_{beta,eps}(r) = X+(x_j)`` node by node, project back;
3. linear (diagonal): ``X_new = (exp(-dt lambda_k) X++ + dt kappa a) / (1 + dt kappa)``,
   i.e. the exact propagator of ``A`` followed by an implicit step of the
   extra drift ``kappa (Z - a)``,

where ``kappa = M/(t - tau)`` and ``a`` is the target of the drifted
dynamics (``kappa = 0`` otherwise).  The tangent ``Y`` is propagated by the
exact derivative of this map, so finite differences of the discrete flow
converge to it at first order in the perturbation size.

Test modes switch parts of the dynamics off:

* ``drift_mode``: ``"potential"`` (default), ``"linear"`` (``Psi'(r) = r``,
  folded into the exact propagator ``exp(-dt (1 + lambda_k))``, i.e. the
  ``(I+A)`` linear convention) or ``"off"``;
* ``noise_mode``: ``"full"`` (default), ``"additive"`` (``m`` frozen to 1) or ``"off"``;
* ``linear_mode``: ``"on"`` (default) or ``"off"`` (drops ``A``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .noise import NoiseParams
from .potentials import PotentialTable, RootFindingError, implicit_solve, potential_table
from .rng import GaussianStreams
from .spectral import Basis, SpectralField, build_basis


class SimulationAborted(RuntimeError):
    """Non-finite state; carries the last finite state and its step index."""

    def __init__(self, message: str, last_good: np.ndarray, step: int):
        super().__init__(message)
        self.last_good = last_good
        self.step = step


@dataclass(frozen=True)
class ModelParams:
    """Exponents and regularisation of the model.

    Parameters
    ----------
    alpha : float
        Degeneracy of the noise, ``alpha >= 2``.
    beta : float
        Singularity of the drift potential, ``beta >= 1``.
    gamma : float
        Monitoring exponent for the energy ``Psi_gamma``.
    delta : float
        Noise color.
    sigma : float
        Sobolev index of the noise regularity, in ``[0, 1/2)``.
    epsilon : float
        Regularisation, in ``(0, 1)``.
    bc : {"dirichlet", "neumann"}
    domain_length : float
    """

    alpha: float = 4.0
    beta: float = 1.0
    gamma: float = 6.0
    delta: float = 0.45
    sigma: float = 0.15
    epsilon: float = 0.1
    bc: str = "dirichlet"
    domain_length: float = math.pi

    def __post_init__(self):
        if self.alpha < 2:
            raise ValueError("alpha must be >= 2")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 <= self.sigma < 0.5:
            raise ValueError("sigma must lie in [0, 1/2)")

    def regime(self) -> dict:
        """Which of the well-posedness / irreducibility / uniqueness regimes apply (d = 1)."""
        a, b, g, d, s = self.alpha, self.beta, self.gamma, self.delta, self.sigma
        wp = d > 0.25 + s
        if s > 0.25:
            wp = wp and g >= 1
        elif s == 0.25:
            wp = wp and (g <= a + b or a > 2)
        else:
            hi1 = (a - 8 * s) / (1 - 4 * s)
            hi2 = min(a + b, (a - 8 * s + 4 * b * s) / (1 - 4 * s))
            wp = wp and 1 <= g <= max(hi1, hi2)
        if d < 0.5:
            irr_gamma = g >= max(b, a + 2)
        else:
            irr_gamma = g >= max(2 * b, a + 4)
        irr = wp and d < 0.5 + s and irr_gamma
        s1 = 0.25 * max(b / (a + b - 2), 1 / (2 * a)) if a + b > 2 else math.inf
        s2 = 0.25 * max((2 * b + 2) / (a + 2 * b), 1 / (a + 2))
        uniq = (a > 2 and s1 < s < 0.25 and 0.25 + s < d < 0.5) or (
            a >= 4 and s2 < s < 0.5 and 0.5 <= d < 0.5 + s and 0.25 + s < d < 1
        )
        sep = irr and d > 0.25 and g > 2 / (4 * d - 1) + 2
        return {"well_posed": bool(wp), "irreducible": bool(irr), "unique_invariant": bool(uniq), "separation_nonuniform": bool(sep)}

    def warn_regime(self):
        for name, ok in self.regime().items():
            if not ok:
                warnings.warn(f"parameters outside the {name.replace('_', ' ')} regime", stacklevel=2)


@dataclass(frozen=True)
class DriftConfig:
    """Extra drift ``(M/(t - tau)) (Z - a)`` active on ``[tau, t]``."""

    gain: float
    tau: float
    t_end: float
    target: np.ndarray

    @property
    def kappa(self) -> float:
        return self.gain / (self.t_end - self.tau)


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation and run controls (see module docstring for the test modes)."""

    n_modes: int = 32
    dt: float = 1e-3
    horizon: float = 1.0
    seed: int = 0
    store_stride: int = 1
    tangent_enabled: bool = False
    drift: Optional[DriftConfig] = None
    clamp_mode: str = "none"
    drift_mode: str = "potential"
    noise_mode: str = "full"
    linear_mode: str = "on"
    newton_tol: float = 1e-14

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.store_stride < 1:
            raise ValueError("store_stride must be >= 1")
        if self.drift is not None and not self.drift.tau < self.drift.t_end:
            raise ValueError("drift needs tau < t")
        if self.clamp_mode not in ("none", "report_only"):
            raise ValueError(f"unknown clamp_mode {self.clamp_mode!r}")
        if self.drift_mode not in ("potential", "linear", "off"):
            raise ValueError(f"unknown drift_mode {self.drift_mode!r}")
        if self.noise_mode not in ("full", "additive", "off"):
            raise ValueError(f"unknown noise_mode {self.noise_mode!r}")
        if self.linear_mode not in ("on", "off"):
            raise ValueError(f"unknown linear_mode {self.linear_mode!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class StepAux:
    """Per-step by-products used by estimators."""

    bel_increment: Optional[np.ndarray] = None
    outside: int = 0


class Stepper:
    """Precomputed operators for one ``(ModelParams, SolverConfig)`` pair.

    Immutable after construction; safe to share between threads.
    """

    def __init__(self, params: ModelParams, config: SolverConfig):
        self.params = params
        self.config = config
        self.basis: Basis = build_basis(params.bc, params.domain_length, config.n_modes)
        self.noise = NoiseParams(params.alpha, params.delta, params.epsilon, self.basis)
        self.drift_table: PotentialTable = potential_table(params.beta, params.epsilon)
        self.noise_table: PotentialTable = potential_table(0.5 * params.alpha, params.epsilon)
        b = self.basis
        self.lam = b.eigenvalues
        self.color = b.fractional_multiplier(-params.delta)
        sq = b.square_grid
        dg = b.grid
        self.S_sq = np.ascontiguousarray(sq.synthesis.T)  # (N, M): coeffs @ S -> values
        self.A_sq = np.ascontiguousarray(sq.weight * sq.synthesis)  # (M, N): values @ A -> coeffs
        self.S_d = np.ascontiguousarray(dg.synthesis.T)
        self.A_d = np.ascontiguousarray(dg.weight * dg.synthesis)
        self.weight_d = dg.weight
        lin = self.lam if config.linear_mode == "on" else np.zeros_like(self.lam)
        if config.drift_mode == "linear":
            lin = lin + 1.0
        self.propagator = np.exp(-config.dt * lin)

    def step(
        self,
        X: np.ndarray,
        xi: np.ndarray,
        kappa: float = 0.0,
        target: Optional[np.ndarray] = None,
        Y: Optional[np.ndarray] = None,
        bel: bool = False,
    ):
        """Advance a batch ``X`` (shape ``(B, N)``) by one step.

        Returns ``(X_new, Y_new, aux)``; ``Y_new`` is ``None`` without a tangent.
        With ``bel=True`` (requires ``Y``) ``aux.bel_increment`` holds
        ``(G^{-1}(X) Y+, dW) - dt tr(G^{-1}(X) DG(X)[Y])`` per trajectory.
        """
        cfg = self.config
        dt = cfg.dt
        dW = xi * math.sqrt(dt)
        aux = StepAux()
        # 1. noise
        if cfg.noise_mode == "off":
            Xp = X
            Yp = Y
            if bel:
                raise ValueError("the derivative estimator needs noise")
        else:
            colored = (self.color * dW) @ self.S_sq
            if cfg.noise_mode == "additive":
                Xp = X + self.color * dW
                Yp = Y
                if bel:
                    aux.bel_increment = np.sum((Y / self.color) * dW, axis=-1)
            else:
                xs = X @ self.S_sq
                if Y is not None:
                    m, dm = self.noise_table.m_and_dm(xs)
                else:
                    m = self.noise_table.m(xs)
                Xp = X + (m * colored) @ self.A_sq
                if Y is not None:
                    ys = Y @ self.S_sq
                    Yp = Y + (dm * ys * colored) @ self.A_sq
                    if bel:
                        ginv = (((Yp @ self.S_sq) / m) @ self.A_sq) / self.color
                        trace = np.sum(dm / m * ys, axis=-1)
                        aux.bel_increment = np.sum(ginv * dW, axis=-1) - dt * trace
                else:
                    Yp = None
        # 2. potential
        if cfg.drift_mode == "potential":
            rhs = Xp @ self.S_d
            r, d2, _ = implicit_solve(self.drift_table, rhs, dt, tol=cfg.newton_tol)
            Xpp = r @ self.A_d
            if cfg.clamp_mode == "report_only":
                aux.outside = int(np.count_nonzero(np.abs(r) > 1.0))
            Ypp = None if Yp is None else ((Yp @ self.S_d) / (1.0 + dt * d2)) @ self.A_d
        else:
            Xpp, Ypp = Xp, Yp
        # 3. linear
        Xn = self.propagator * Xpp
        Yn = None if Ypp is None else self.propagator * Ypp
        if kappa:
            div = 1.0 + dt * kappa
            Xn = (Xn + dt * kappa * target) / div
            if Yn is not None:
                Yn = Yn / div
        return Xn, Yn, aux

    # ------------------------------------------------------------------
    def energy(self, X: np.ndarray) -> np.ndarray:
        """Discrete Lyapunov functional ``1/2 ||A^{1/2} X||^2 + int Psi_{beta,eps}(X)``."""
        quad = 0.5 * np.sum(self.lam * X * X, axis=-1)
        pot = self.weight_d * np.sum(self.drift_table.psi(X @ self.S_d), axis=-1)
        return quad + pot

    def grid_values(self, X: np.ndarray) -> np.ndarray:
        return X @ self.S_d


@dataclass
class TrajectoryRecord:
    """Stored snapshots of an ensemble run.

    ``states`` has shape ``(n_store, B, N)``; ``tangents`` likewise when the
    tangent was enabled.  ``bel_integral`` is the accumulated
    derivative-estimator integral per trajectory (when requested).
    """

    times: np.ndarray
    states: np.ndarray
    trajectories: np.ndarray
    step_index: int
    lineage: dict
    tangents: Optional[np.ndarray] = None
    bel_integral: Optional[np.ndarray] = None
    outside_fraction: float = 0.0
    sup_abs: Optional[np.ndarray] = None
    monitors: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _as_batch(x0, n_modes: int, batch: int) -> np.ndarray:
    if isinstance(x0, SpectralField):
        x0 = x0.coeffs
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != n_modes:
        raise ValueError(f"initial datum has {x0.shape[-1]} modes, solver uses {n_modes}")
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (batch, n_modes))
    if x0.shape[0] != batch:
        raise ValueError("initial data batch does not match the number of trajectories")
    return np.array(x0, dtype=float)


def simulate(
    x0,
    params: ModelParams,
    config: SolverConfig,
    trajectories=(0,),
    h0=None,
    bel: bool = False,
    start_step: int = 0,
    n_steps: Optional[int] = None,
    observer: Optional[Callable[[int, np.ndarray], None]] = None,
    stepper: Optional[Stepper] = None,
    store: bool = True,
) -> TrajectoryRecord:
    """Integrate a batch of trajectories.

    Parameters
    ----------
    x0 : array_like or SpectralField
        Initial coefficients, shape ``(N,)`` (shared) or ``(B, N)``.
    trajectories : sequence of int
        Global trajectory indices; they select the noise streams.
    h0 : array_like, optional
        Initial tangent direction; enables the tangent when given.
    bel : bool
        Accumulate the derivative-estimator integral along the path.
    start_step, n_steps : int
        Resume from ``start_step`` (the noise for step ``k`` depends only on
        ``(seed, trajectory, k)``) and take ``n_steps`` steps (default: up to
        ``config.horizon``).
    observer : callable, optional
        Called as ``observer(step, X)`` after every step (``step`` counts
        completed steps); used by the monitors.
    """
    st = stepper or Stepper(params, config)
    traj = np.atleast_1d(np.asarray(trajectories, dtype=np.int64))
    B = traj.shape[0]
    N = config.n_modes
    X = _as_batch(x0, N, B)
    Y = None
    if h0 is not None or config.tangent_enabled:
        Y = _as_batch(np.zeros(N) if h0 is None else h0, N, B)
    total = config.n_steps - start_step if n_steps is None else n_steps
    streams = GaussianStreams(config.seed, traj, N)
    drift = config.drift
    dt = config.dt
    stride = config.store_stride
    times = [start_step * dt]
    states = [X.copy()] if store else []
    tangents = [Y.copy()] if (store and Y is not None) else None
    bel_acc = np.zeros(B) if bel else None
    outside = 0
    sup_abs = np.max(np.abs(st.grid_values(X)), axis=-1)
    for i in range(total):
        k = start_step + i
        t_now = k * dt
        kappa = 0.0
        target = None
        if drift is not None and t_now >= drift.tau - 1e-12 * dt:
            kappa = drift.kappa
            target = drift.target
        xi = streams.normals(k)
        Xn, Yn, aux = st.step(X, xi, kappa, target, Y, bel)
        if not np.all(np.isfinite(Xn)):
            raise SimulationAborted(f"non-finite state at step {k + 1}", X, k)
        if bel:
            bel_acc += aux.bel_increment
        outside += aux.outside
        X, Y = Xn, Yn
        sup_abs = np.maximum(sup_abs, np.max(np.abs(st.grid_values(X)), axis=-1))
        if observer is not None:
            observer(k + 1, X)
        if store and ((i + 1) % stride == 0 or i + 1 == total):
            times.append((k + 1) * dt)
            states.append(X.copy())
            if tangents is not None:
                tangents.append(Y.copy())
    if not store:
        times = [(start_step + total) * dt]
        states = [X.copy()]
        tangents = None if Y is None else [Y.copy()]
    m_nodes = st.basis.grid.size
    frac = outside / max(1, total * B * m_nodes) if config.clamp_mode == "report_only" else 0.0
    return TrajectoryRecord(
        times=np.asarray(times),
        states=np.stack(states),
        trajectories=traj,
        step_index=start_step + total,
        lineage=streams.lineage(),
        tangents=None if tangents is None else np.stack(tangents),
        bel_integral=bel_acc,
        outside_fraction=frac,
        sup_abs=sup_abs,
    )


def step_x(state: SpectralField, params: ModelParams, config: SolverConfig, xi: np.ndarray, stepper: Optional[Stepper] = None) -> SpectralField:
    """Single step of one state (convenience wrapper around :class:`Stepper`)."""
    st = stepper or Stepper(params, config)
    Xn, _, _ = st.step(state.coeffs[None, :], np.asarray(xi, dtype=float)[None, :])
    return SpectralField(st.basis, Xn[0])


def step_tangent(Y: SpectralField, X: SpectralField, params: ModelParams, config: SolverConfig, xi: np.ndarray, stepper: Optional[Stepper] = None):
    """Advance ``(X, Y)`` together with the same increments; returns both."""
    if xi is None:
        raise ValueError("the tangent step needs the increments of the base path")
    st = stepper or Stepper(params, config)
    Xn, Yn, _ = st.step(X.coeffs[None, :], np.asarray(xi, dtype=float)[None, :], Y=Y.coeffs[None, :])
    return SpectralField(st.basis, Xn[0]), SpectralField(st.basis, Yn[0])


def step_drifted(Z: SpectralField, params: ModelParams, config: SolverConfig, xi: np.ndarray, stepper: Optional[Stepper] = None) -> SpectralField:
    """One step of the drifted dynamics (``config.drift`` must be set)."""
    if config.drift is None:
        raise ValueError("step_drifted needs a drift configuration")
    st = stepper or Stepper(params, config)
    d = config.drift
    Zn, _, _ = st.step(Z.coeffs[None, :], np.asarray(xi, dtype=float)[None, :], d.kappa, d.target)
    return SpectralField(st.basis, Zn[0])


def with_modes(config: SolverConfig, **changes) -> SolverConfig:
    return replace(config, **changes)


__all__ = [
    "ModelParams",
    "SolverConfig",
    "DriftConfig",
    "Stepper",
    "TrajectoryRecord",
    "SimulationAborted",
    "RootFindingError",
    "simulate",
    "step_x",
    "step_tangent",
    "step_drifted",
]
