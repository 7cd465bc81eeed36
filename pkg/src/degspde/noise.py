"""
Multiplicative noise ``G(x)[u] = m_{alpha/2}(x) (I+A)^{-delta} u`` and friends.

Pointwise products that have to be inverted (the noise coefficient and its
inverse) are formed on the *square* collocation grid of the basis, where
synthesis and analysis are exact inverses.  In truncation this makes
``G(x)`` an invertible ``N x N`` matrix and the identities
``G G^{-1} = G^{-1} G = I`` hold to rounding.  The output of every product is
projected onto the retained eigenfunctions, which is the Galerkin-consistent
reading of ``G`` for Dirichlet data (a product ``m(x) w`` need not vanish at
the boundary).

All ``*_coeffs`` functions take batched coefficient arrays (last axis = mode).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .potentials import eval_m, eval_dm, potential_table
from .spectral import Basis, GridField, SpectralField, hs_norm_fractional


class FeasibilityError(ValueError):
    """State too close to (or beyond) the barriers for the requested operation."""

    def __init__(self, message: str, min_gap: float):
        super().__init__(f"{message} (min 1-|x| = {min_gap:.3e})")
        self.min_gap = min_gap


@dataclass(frozen=True)
class NoiseParams:
    """Parameters of the noise coefficient.

    Parameters
    ----------
    alpha : float
        Degeneracy exponent; the mobility factor is ``m_{alpha/2}``.
    delta : float
        Color exponent of ``(I+A)^{-delta}``.
    epsilon : float
        Regularisation (0 for the degenerate coefficient).
    basis : Basis
    sep_floor : float
        Minimal distance to the barriers required by the unregularised inverse.
    """

    alpha: float
    delta: float
    epsilon: float
    basis: Basis
    sep_floor: float = 1e-6

    def __post_init__(self):
        if self.alpha < 2:
            raise ValueError("alpha must be >= 2")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.delta <= 0.25:
            warnings.warn(f"delta = {self.delta} <= 1/4: the noise is not Hilbert-Schmidt on H", stacklevel=2)

    @property
    def color(self) -> np.ndarray:
        return self.basis.fractional_multiplier(-self.delta)

    @property
    def exponent(self) -> float:
        return 0.5 * self.alpha

    def check_regime(self, sigma: float) -> bool:
        """``delta > 1/4 + sigma``; warns when violated."""
        ok = self.delta > 0.25 + sigma
        if not ok:
            warnings.warn(f"delta = {self.delta} is not above 1/4 + sigma = {0.25 + sigma}", stacklevel=2)
        return ok

    # pointwise coefficients -------------------------------------------------

    def _table(self):
        return potential_table(self.exponent, self.epsilon)

    def mobility(self, values: np.ndarray) -> np.ndarray:
        if self.epsilon > 0:
            return self._table().m(values)
        if np.any(np.abs(values) > 1.0):
            raise FeasibilityError("degenerate noise evaluated outside [-1, 1]", float(np.min(1 - np.abs(values))))
        return eval_m(self.exponent, values)

    def mobility_and_derivative(self, values: np.ndarray):
        if self.epsilon > 0:
            return self._table().m_and_dm(values)
        return self.mobility(values), eval_dm(self.exponent, values)

    def inverse_mobility(self, values: np.ndarray) -> np.ndarray:
        """``Psi''_{alpha/2,(eps)} = 1/m_{alpha/2,(eps)}``."""
        if self.epsilon > 0:
            return self._table().d2psi(values)
        gap = 1.0 - np.abs(values)
        if np.min(gap) < self.sep_floor:
            raise FeasibilityError("noise inverse needs max|x| <= 1 - sep_floor", float(np.min(gap)))
        return (1.0 - values * values) ** (-self.exponent)


# ---------------------------------------------------------------------------
# Coefficient-level kernels (batched)
# ---------------------------------------------------------------------------


def apply_G_coeffs(params: NoiseParams, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Coefficients of ``P_N[m(x) (I+A)^{-delta} u]``."""
    g = params.basis.square_grid
    return g.analyze(params.mobility(g.synthesize(x)) * g.synthesize(params.color * u))


def apply_G_inverse_coeffs(params: NoiseParams, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Coefficients of ``(I+A)^{delta} P_N[Psi''_{alpha/2}(x) v]``."""
    g = params.basis.square_grid
    return g.analyze(params.inverse_mobility(g.synthesize(x)) * g.synthesize(v)) / params.color


def apply_DG_coeffs(params: NoiseParams, x: np.ndarray, h: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Coefficients of ``P_N[m'(x) h (I+A)^{-delta} u]``."""
    g = params.basis.square_grid
    _, dm = params.mobility_and_derivative(g.synthesize(x))
    return g.analyze(dm * g.synthesize(h) * g.synthesize(params.color * u))


def trace_Ginv_DG(params: NoiseParams, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Trace of ``u -> G^{-1}(x) DG(x)[h] u`` in truncation.

    On the square grid the operator is similar to multiplication by
    ``(m'/m)(x) h``, so the trace is the plain nodal sum.
    """
    g = params.basis.square_grid
    m, dm = params.mobility_and_derivative(g.synthesize(x))
    return np.sum(dm / m * g.synthesize(h), axis=-1)


def noise_matrix(params: NoiseParams, x: np.ndarray) -> np.ndarray:
    """Matrix of ``G(x)`` in the eigenbasis (single state)."""
    g = params.basis.square_grid
    m = params.mobility(g.synthesize(x))
    return g.weight * (g.synthesis.T * m) @ g.synthesis * params.color[None, :]


# ---------------------------------------------------------------------------
# Typed interface
# ---------------------------------------------------------------------------


def _as_coeffs(params: NoiseParams, x) -> np.ndarray:
    if isinstance(x, SpectralField):
        return x.coeffs
    if isinstance(x, GridField):
        grid = params.basis.get_grid(x.kind)
        return grid.analyze(x.values)
    raise TypeError("expected SpectralField or GridField")


def apply_G(params: NoiseParams, x: GridField | SpectralField, u: SpectralField, kind: str = "dealiased") -> GridField:
    """``m_{alpha/2,(eps)}(x) (I+A)^{-delta} u`` as nodal values on ``kind``.

    When ``x`` is a grid field on the same grid the product is formed with its
    values directly; otherwise ``x`` is resynthesised.
    """
    basis = params.basis
    grid = basis.get_grid(kind)
    if isinstance(x, GridField) and x.kind == kind:
        xv = x.values
    else:
        xv = grid.synthesize(_as_coeffs(params, x))
    return GridField(basis, params.mobility(xv) * grid.synthesize(params.color * u.coeffs), kind)


def apply_DG(params: NoiseParams, x: GridField, h: GridField, u: SpectralField) -> GridField:
    """``m'_{alpha/2,eps}(x) h (I+A)^{-delta} u`` pointwise on the grid of ``x``."""
    if params.epsilon <= 0:
        raise ValueError("DG is only used for the regularised coefficient (eps > 0)")
    if h.kind != x.kind:
        raise ValueError("x and h must live on the same grid")
    grid = params.basis.get_grid(x.kind)
    _, dm = params.mobility_and_derivative(x.values)
    return GridField(params.basis, dm * h.values * grid.synthesize(params.color * u.coeffs), x.kind)


def apply_G_inverse(params: NoiseParams, x: GridField | SpectralField, v: SpectralField) -> SpectralField:
    """``G^{-1}(x)[v] = (I+A)^{delta} (Psi''_{alpha/2,(eps)}(x) v)``."""
    return SpectralField(params.basis, apply_G_inverse_coeffs(params, _as_coeffs(params, x), v.coeffs))


def sample_noise_term(params: NoiseParams, x: GridField | SpectralField, dt: float, xi: np.ndarray) -> SpectralField:
    """``P_N[m(x) sum_k (1+lambda_k)^{-delta} xi_k sqrt(dt) e_k]``.

    ``xi`` holds standard normals (see :mod:`degspde.rng`); the increment is
    evaluated at the given (pre-step) state.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    dw = np.asarray(xi, dtype=float) * math.sqrt(dt)
    return SpectralField(params.basis, apply_G_coeffs(params, _as_coeffs(params, x), dw))


def hs_norm_G(params: NoiseParams, x: GridField | SpectralField, sigma: float = 0.0) -> float:
    """Squared Hilbert-Schmidt norm of ``G(x): H -> V_{2 sigma}`` in truncation."""
    mat = noise_matrix(params, _as_coeffs(params, x))
    w = params.basis.shifted_eigenvalues() ** (2.0 * sigma)
    return float(np.sum(w[:, None] * mat**2))


def truncation_tail(params: NoiseParams, sigma: float = 0.0) -> float:
    """Hilbert-Schmidt mass of the discarded modes at ``x = 0``."""
    return hs_norm_fractional(params.delta, sigma, params.basis).tail_estimate_sq


@dataclass(frozen=True)
class InverseBound:
    surrogate: float
    empirical: float
    iterations: int

    @property
    def ratio(self) -> float:
        return self.empirical / self.surrogate


def g_inverse_operator_bound(params: NoiseParams, x: GridField | SpectralField, tol: float = 1e-12, max_iter: int = 5000, seed: int = 0) -> InverseBound:
    """Monitored size of ``G^{-1}(x)`` on ``V_{2 delta}``.

    Returns the surrogate ``||Psi''_{alpha/2}(x)||_{V_{2 delta}}`` and the
    operator norm of ``G^{-1}(x)`` from the unit sphere of ``V_{2 delta}`` into
    ``H``, estimated by power iteration on ``B^T B`` with
    ``B w = G^{-1}(x)[(I+A)^{-delta} w]``.
    """
    basis = params.basis
    g = basis.square_grid
    xc = _as_coeffs(params, x)
    q = params.inverse_mobility(g.synthesize(xc))
    surrogate = float(np.sqrt(np.sum(basis.shifted_eigenvalues() ** (2 * params.delta) * g.analyze(q) ** 2)))
    color = params.color
    mat = g.weight * (g.synthesis.T * q) @ g.synthesis
    B = (mat * color[None, :]) / color[:, None]
    v = np.random.default_rng(seed).standard_normal(basis.n_modes)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, max_iter + 1):
        w = B.T @ (B @ v)
        new = math.sqrt(np.linalg.norm(w))
        v = w / np.linalg.norm(w)
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return InverseBound(surrogate, est, it)


def aliasing_fraction(coeffs: np.ndarray, top: float = 0.1) -> np.ndarray:
    """Share of the squared norm carried by the top ``top`` fraction of modes."""
    n = coeffs.shape[-1]
    k = max(1, int(math.ceil(top * n)))
    total = np.sum(coeffs**2, axis=-1)
    upper = np.sum(coeffs[..., n - k :] ** 2, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, upper / total, 0.0)
