import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from degspde.spectral import (
    Basis,
    GridField,
    SpectralField,
    build_basis,
    dealiased_size,
    hs_norm_fractional,
    sobolev_norm,
    to_grid,
    to_grid_fast,
    to_spectral,
    to_spectral_fast,
)

BCS = ("dirichlet", "neumann")


@pytest.mark.parametrize("bc", BCS)
@pytest.mark.parametrize("kind", ("dealiased", "square"))
def test_discrete_orthonormality(bc, kind):
    b = build_basis(bc, 2.0, 24)
    gram = b.l2_inner_diagnostic(kind)
    assert np.max(np.abs(gram - np.eye(24))) < 1e-12


@pytest.mark.parametrize("bc", BCS)
def test_eigenvalues(bc):
    b = build_basis(bc, math.pi, 5)
    k = np.arange(1, 6) if bc == "dirichlet" else np.arange(0, 5)
    assert np.allclose(b.eigenvalues, k**2)


@pytest.mark.parametrize("bc", BCS)
def test_eigenfunctions_are_eigenfunctions(bc):
    b = build_basis(bc, 1.7, 6)
    x = np.linspace(0.1, 1.6, 7)
    h = 1e-4
    second = (b.eigenfunctions(x + h) - 2 * b.eigenfunctions(x) + b.eigenfunctions(x - h)) / h**2
    assert np.allclose(-second, b.eigenvalues * b.eigenfunctions(x), rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("bc", BCS)
def test_eigenfunction_derivatives(bc):
    b = build_basis(bc, 2.5, 8)
    x = np.linspace(0.05, 2.45, 11)
    h = 1e-6
    fd = (b.eigenfunctions(x + h) - b.eigenfunctions(x - h)) / (2 * h)
    assert np.allclose(b.eigenfunction_derivatives(x), fd, atol=1e-7)


@pytest.mark.parametrize("bc", BCS)
def test_continuous_normalisation(bc):
    b = build_basis(bc, 3.0, 3)
    for k in range(3):
        val, _ = integrate.quad(lambda x: b.eigenfunctions(np.array(x))[k] ** 2, 0, 3.0)
        assert val == pytest.approx(1.0, abs=1e-10)


def test_dealiased_size():
    assert [dealiased_size(n) for n in (1, 2, 16, 17, 32)] == [2, 3, 24, 26, 48]


@settings(max_examples=40, deadline=None)
@given(
    bc=st.sampled_from(BCS),
    n=st.integers(1, 40),
    seed=st.integers(0, 2**31),
)
def test_square_grid_round_trip(bc, n, seed):
    b = build_basis(bc, 1.3, n)
    c = np.random.default_rng(seed).standard_normal(n)
    f = SpectralField(b, c)
    back = to_spectral(to_grid(f, "square"))
    assert np.allclose(back.coeffs, c, atol=1e-12)
    # analysis of a degree-N field is exact on the dealiased grid as well
    assert np.allclose(to_spectral(to_grid(f)).coeffs, c, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(bc=st.sampled_from(BCS), n=st.integers(2, 40), seed=st.integers(0, 2**31), kind=st.sampled_from(("dealiased", "square")))
def test_fast_transforms_agree(bc, n, seed, kind):
    b = build_basis(bc, 2.0, n)
    c = np.random.default_rng(seed).standard_normal((3, n))
    f = SpectralField(b, c)
    g1, g2 = to_grid(f, kind), to_grid_fast(f, kind)
    assert np.allclose(g1.values, g2.values, atol=1e-12)
    assert np.allclose(to_spectral(g1).coeffs, to_spectral_fast(g1).coeffs, atol=1e-12)


def test_field_shape_checks():
    b = build_basis("dirichlet", 1.0, 4)
    with pytest.raises(ValueError):
        SpectralField(b, np.zeros(5))
    with pytest.raises(ValueError):
        GridField(b, np.zeros(4), "dealiased")
    with pytest.raises(ValueError):
        Basis("periodic", 1.0, 4)


def test_sobolev_norm_of_single_mode():
    b = build_basis("dirichlet", math.pi, 4)
    c = np.zeros(4)
    c[2] = 2.0
    assert float(sobolev_norm(SpectralField(b, c), 0.5)) == pytest.approx(2.0 * math.sqrt(10.0))


def test_negative_power_of_A_rejects_constant_mode():
    b = build_basis("neumann", 1.0, 3)
    with pytest.raises(ZeroDivisionError):
        b.fractional_multiplier(-0.5, shifted=False)


def test_hs_norm_divergent_regime():
    b = build_basis("dirichlet", math.pi, 16)
    rep = hs_norm_fractional(0.25, 0.0, b)
    assert not rep.converges and math.isinf(rep.total_sq)


def test_hs_norm_tail_matches_long_partial_sum():
    small = hs_norm_fractional(0.45, 0.15, build_basis("dirichlet", math.pi, 64))
    k = np.arange(1, 2_000_001, dtype=float)
    long_sum = float(np.sum((1 + k * k) ** (2 * (0.15 - 0.45))))
    big = hs_norm_fractional(0.45, 0.15, build_basis("dirichlet", math.pi, 2_000_000))
    assert small.total_sq == pytest.approx(big.total_sq, rel=1e-5)
    assert big.partial_sum_sq == pytest.approx(long_sum, rel=1e-12)


@pytest.mark.parametrize("bc,L,delta,sigma", [("dirichlet", math.pi, 0.45, 0.15), ("neumann", 2.0, 0.3, 0.0), ("dirichlet", 1.0, 0.5, 0.0)])
def test_hs_tail_against_arbitrary_precision_quadrature(bc, L, delta, sigma):
    mp = pytest.importorskip("mpmath")
    b = build_basis(bc, L, 20)
    rep = hs_norm_fractional(delta, sigma, b)
    shift = 1 if bc == "neumann" else 0
    p = 2 * (sigma - delta)
    # k = a s^{-q} with q = 1/(-2p-1) turns the algebraic tail into a smooth integrand on (0, 1]
    mp.mp.dps = 30
    a, q = mp.mpf("20.5"), 1 / (-2 * mp.mpf(p) - 1)
    f = lambda k: (1 + ((k - shift) * mp.pi / L) ** 2) ** p
    ref = mp.quad(lambda s: f(a * s ** (-q)) * a * q * s ** (-q - 1), [0, 1])
    assert rep.tail_estimate_sq == pytest.approx(float(ref), rel=1e-10)
