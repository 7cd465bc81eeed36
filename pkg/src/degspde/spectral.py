"""
Laplacian eigenbasis on an interval and the transforms built on it.

The basis is the L2-orthonormal eigensystem of ``A = -d^2/dx^2`` on ``(0, L)``
with homogeneous Dirichlet or Neumann conditions::

    dirichlet:  e_k(x) = sqrt(2/L) sin(k pi x / L),        lambda_k = (k pi / L)^2,       k = 1..N
    neumann:    e_1(x) = 1/sqrt(L),
                e_k(x) = sqrt(2/L) cos((k-1) pi x / L),    lambda_k = ((k-1) pi / L)^2,   k = 1..N

Two collocation grids are attached to every basis:

* the *dealiased* grid with ``M = ceil(3N/2)`` nodes, used for pointwise
  evaluation of non-polynomial nonlinearities;
* the *square* grid with ``M = N`` nodes, on which synthesis and analysis are
  mutual inverses (used where pointwise multiplication operators must be
  exactly invertible in truncation).

Dirichlet grids are interior equispaced sine nodes ``x_j = j L/(M+1)``;
Neumann grids are midpoint cosine nodes ``x_j = (j+1/2) L/M``.  Analysis is the
discrete inner product with the matching quadrature weight, which is exact on
the span of the first ``M`` eigenfunctions.

All arrays carry the mode / node index on the last axis, so leading batch
dimensions are transformed in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import fft as sfft
from scipy import special

BoundaryKind = Literal["dirichlet", "neumann"]


@dataclass(frozen=True)
class Grid:
    """Collocation nodes with the transform pair for a given basis."""

    nodes: np.ndarray
    weight: float
    synthesis: np.ndarray  # (M, N): values of e_k at the nodes
    kind: str

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.synthesis.T

    def analyze(self, values: np.ndarray) -> np.ndarray:
        return self.weight * (values @ self.synthesis)


@dataclass(frozen=True)
class Basis:
    """Truncated eigenbasis of the Laplacian on ``(0, L)``.

    Parameters
    ----------
    bc : {"dirichlet", "neumann"}
        Boundary condition.
    domain_length : float
        Interval length ``L``.
    n_modes : int
        Number of retained eigenpairs ``N``.
    """

    bc: BoundaryKind
    domain_length: float
    n_modes: int
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        object.__setattr__(self, "eigenvalues", self._frequencies(self.n_modes) ** 2)
        self.eigenvalues.setflags(write=False)

    def _frequencies(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        if self.bc == "neumann":
            k = k - 1.0
        return k * math.pi / self.domain_length

    def eigenfunctions(self, x: np.ndarray) -> np.ndarray:
        """Values ``e_k(x)`` with shape ``x.shape + (N,)``."""
        x = np.asarray(x, dtype=float)[..., None]
        w = self._frequencies(self.n_modes)
        amp = math.sqrt(2.0 / self.domain_length)
        if self.bc == "dirichlet":
            return amp * np.sin(w * x)
        out = amp * np.cos(w * x)
        out[..., 0] = 1.0 / math.sqrt(self.domain_length)
        return out

    def eigenfunction_derivatives(self, x: np.ndarray) -> np.ndarray:
        """Values ``e_k'(x)`` with shape ``x.shape + (N,)``."""
        x = np.asarray(x, dtype=float)[..., None]
        w = self._frequencies(self.n_modes)
        amp = math.sqrt(2.0 / self.domain_length)
        if self.bc == "dirichlet":
            return amp * w * np.cos(w * x)
        return -amp * w * np.sin(w * x)

    def _make_grid(self, m: int, kind: str) -> Grid:
        L = self.domain_length
        if self.bc == "dirichlet":
            nodes = np.arange(1, m + 1) * L / (m + 1)
            weight = L / (m + 1)
        else:
            nodes = (np.arange(m) + 0.5) * L / m
            weight = L / m
        synth = self.eigenfunctions(nodes)
        synth.setflags(write=False)
        nodes.setflags(write=False)
        return Grid(nodes=nodes, weight=weight, synthesis=synth, kind=kind)

    @cached_property
    def grid(self) -> Grid:
        """Dealiased collocation grid, ``M = ceil(3N/2)``."""
        return self._make_grid(dealiased_size(self.n_modes), "dealiased")

    @cached_property
    def square_grid(self) -> Grid:
        """Collocation grid with ``M = N``; transforms are mutual inverses."""
        return self._make_grid(self.n_modes, "square")

    def get_grid(self, kind: str = "dealiased") -> Grid:
        if kind == "dealiased":
            return self.grid
        if kind == "square":
            return self.square_grid
        raise ValueError(f"unknown grid kind {kind!r}")

    def shifted_eigenvalues(self) -> np.ndarray:
        """``1 + lambda_k``."""
        return 1.0 + self.eigenvalues

    def fractional_multiplier(self, s: float, shifted: bool = True) -> np.ndarray:
        """Diagonal of ``(I+A)^s`` (or ``A^s`` when ``shifted`` is False)."""
        lam = self.shifted_eigenvalues() if shifted else self.eigenvalues
        if not shifted and s < 0 and np.any(lam == 0):
            raise ZeroDivisionError("A^s with s < 0 is undefined on the constant mode")
        with np.errstate(divide="ignore"):
            return lam**s

    def l2_inner_diagnostic(self, kind: str = "dealiased") -> np.ndarray:
        """Discrete Gram matrix of the basis on a grid (identity up to rounding)."""
        g = self.get_grid(kind)
        return g.weight * (g.synthesis.T @ g.synthesis)


def dealiased_size(n: int) -> int:
    return -(-3 * n // 2)


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of a function in the eigenbasis (last axis = mode)."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape[-1] != self.basis.n_modes:
            raise ValueError(
                f"coefficient length {c.shape[-1]} does not match basis with {self.basis.n_modes} modes"
            )
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class GridField:
    """Nodal values of a function on one of the basis grids."""

    basis: Basis
    values: np.ndarray
    kind: str = "dealiased"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = self.basis.get_grid(self.kind).size
        if v.shape[-1] != m:
            raise ValueError(f"grid field has {v.shape[-1]} values, {self.kind} grid has {m} nodes")
        object.__setattr__(self, "values", v)

    @property
    def nodes(self) -> np.ndarray:
        return self.basis.get_grid(self.kind).nodes


def build_basis(bc: BoundaryKind, L: float, N: int) -> Basis:
    return Basis(bc=bc, domain_length=float(L), n_modes=int(N))


def to_grid(f: SpectralField, kind: str = "dealiased") -> GridField:
    g = f.basis.get_grid(kind)
    return GridField(f.basis, g.synthesize(f.coeffs), kind)


def to_spectral(g: GridField) -> SpectralField:
    grid = g.basis.get_grid(g.kind)
    return SpectralField(g.basis, grid.analyze(g.values))


def to_grid_fast(f: SpectralField, kind: str = "dealiased") -> GridField:
    """FFT-based synthesis; agrees with :func:`to_grid` to rounding."""
    basis = f.basis
    m = basis.get_grid(kind).size
    n = basis.n_modes
    L = basis.domain_length
    c = np.zeros(f.coeffs.shape[:-1] + (m,))
    c[..., :n] = f.coeffs
    if basis.bc == "dirichlet":
        # DST-I: y_j = 2 sum_k c_k sin(pi k j/(m+1))
        vals = sfft.dst(c, type=1, axis=-1) * 0.5 * math.sqrt(2.0 / L)
    else:
        # DCT-III: y_j = c_0 + 2 sum_{k>=1} c_k cos(pi k (j+1/2)/m)
        c = c.copy()
        c[..., 0] *= math.sqrt(2.0)
        vals = sfft.dct(c, type=3, axis=-1) * 0.5 * math.sqrt(2.0 / L)
    return GridField(basis, vals, kind)


def to_spectral_fast(g: GridField) -> SpectralField:
    """FFT-based analysis; agrees with :func:`to_spectral` to rounding."""
    basis = g.basis
    grid = basis.get_grid(g.kind)
    m = grid.size
    n = basis.n_modes
    L = basis.domain_length
    if basis.bc == "dirichlet":
        raw = sfft.dst(g.values, type=1, axis=-1)
        coeffs = raw * 0.5 * math.sqrt(2.0 / L) * grid.weight
    else:
        raw = sfft.dct(g.values, type=2, axis=-1)
        coeffs = raw * 0.5 * math.sqrt(2.0 / L) * grid.weight
        coeffs[..., 0] /= math.sqrt(2.0)
    del m
    return SpectralField(basis, coeffs[..., :n])


def apply_fractional(f: SpectralField, s: float, shifted: bool = True) -> SpectralField:
    """Apply ``(I+A)^s`` (default) or ``A^s`` diagonally."""
    return SpectralField(f.basis, f.coeffs * f.basis.fractional_multiplier(s, shifted))


def sobolev_norm(f: SpectralField, s: float) -> np.ndarray:
    """Equivalent ``V_{2s}`` norm ``||(I+A)^s f||_H`` (batched over leading axes)."""
    return sobolev_norm_coeffs(f.coeffs, f.basis, s)


def sobolev_norm_coeffs(coeffs: np.ndarray, basis: Basis, s: float) -> np.ndarray:
    w = basis.shifted_eigenvalues() ** (2.0 * s)
    return np.sqrt(np.sum(w * coeffs**2, axis=-1))


@dataclass(frozen=True)
class HSNormReport:
    partial_sum_sq: float
    tail_estimate_sq: float
    converges: bool

    @property
    def total_sq(self) -> float:
        return self.partial_sum_sq + self.tail_estimate_sq

    @property
    def partial(self) -> float:
        return math.sqrt(self.partial_sum_sq)


def hs_norm_fractional(delta: float, sigma: float, basis: Basis) -> HSNormReport:
    """Hilbert-Schmidt norm of ``(I+A)^{-delta}: H -> V_{2 sigma}`` in truncation.

    The tail ``sum_{k>N}`` is estimated by the integral of the summand over
    ``(N + 1/2, inf)`` (midpoint comparison), evaluated in closed form
    through a Gauss hypergeometric function; it is ``inf`` when the series
    diverges, i.e. when ``delta - sigma <= 1/4``.
    """
    p = 2.0 * (sigma - delta)
    partial = float(np.sum(basis.shifted_eigenvalues() ** p))
    converges = (delta - sigma) > 0.25
    if not converges:
        return HSNormReport(partial, math.inf, False)
    L = basis.domain_length
    shift = 1.0 if basis.bc == "neumann" else 0.0
    c = math.pi / L
    b = (basis.n_modes + 0.5 - shift) * c
    # int_b^inf (1 + u^2)^p du = b^{2p+1}/(-2p-1) 2F1(-p, -p-1/2; -p+1/2; -1/b^2)
    tail = b ** (2 * p + 1) / (-2 * p - 1) * special.hyp2f1(-p, -p - 0.5, -p + 0.5, -1.0 / (b * b)) / c
    return HSNormReport(partial, float(tail), True)
