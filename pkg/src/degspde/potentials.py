"""
Degenerate mobilities, singular potentials and their mollified versions.

Conventions
-----------
``m_c(r) = (1 - r^2)^c`` on ``[-1, 1]`` and zero outside.  The potential is the
double primitive of ``1/m_c`` from the origin::

    Psi_c(r) = int_0^r int_0^z (1 - w^2)^{-c} dw dz,

so ``m_c * Psi_c'' == 1`` holds exactly.  With this normalisation the
logarithmic member is ``Psi_1(r) = ((1+r) ln(1+r) + (1-r) ln(1-r)) / 2`` and
``Psi_1' = artanh``.

The regularised family replaces ``m_c`` by ``m_{c,eps} = rho_eps * m_c + eps^c``
with the bump mollifier ``rho(s) = c_N exp(-1/(1-s^2))`` on ``(-1, 1)``, and
``Psi_{c,eps}`` is again the double primitive of ``1/m_{c,eps}``.  The
convolution is evaluated with tanh-sinh quadrature split at the support edges,
then served from a cubic Hermite interpolant of ``q = 1/m_{c,eps}`` on a
uniform grid; ``Psi'`` and ``Psi`` are the exact first and second primitives
of that interpolant, so ``Psi''`` is the exact derivative of ``Psi'`` and the
tangent dynamics stay consistent with the state dynamics to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

#: ``int_{-1}^{1} exp(-1/(1-s^2)) ds`` (30-digit mpmath value, rounded).
BUMP_MASS = 0.443993816168079437823048921171
C_N = 1.0 / BUMP_MASS

#: Unregularised evaluators refuse states this close to the barriers.
BARRIER_GUARD = 1e-12


class DomainError(ValueError):
    """State outside the domain of a singular (unregularised) evaluator."""


class RootFindingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Unregularised family
# ---------------------------------------------------------------------------


def eval_m(c: float, r):
    """Mobility ``(1-r^2)^c`` extended by zero outside ``[-1, 1]``."""
    r = np.asarray(r, dtype=float)
    base = np.clip(1.0 - r * r, 0.0, None)
    out = base**c
    return out if out.ndim else float(out)


def eval_dm(c: float, r):
    """Derivative of :func:`eval_m` (zero outside the support)."""
    r = np.asarray(r, dtype=float)
    base = np.clip(1.0 - r * r, 0.0, None)
    inside = np.abs(r) < 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(inside, -2.0 * c * r * base ** (c - 1.0), 0.0)
    return out if out.ndim else float(out)


def _check_open(r: np.ndarray):
    if np.any(np.abs(r) >= 1.0 - BARRIER_GUARD):
        raise DomainError("singular potential evaluated at |r| >= 1 - 1e-12")


def psi2(c: float, r):
    """``Psi_c'' = (1-r^2)^{-c}`` on ``(-1, 1)``."""
    r = np.asarray(r, dtype=float)
    _check_open(r)
    out = (1.0 - r * r) ** (-c)
    return out if out.ndim else float(out)


def psi1(c: float, r):
    """``Psi_c'(r) = r 2F1(1/2, c; 3/2; r^2)`` (artanh for ``c = 1``)."""
    r = np.asarray(r, dtype=float)
    _check_open(r)
    if c == 1:
        out = np.arctanh(r)
    elif c == 2:
        out = r / (2.0 * (1.0 - r * r)) + 0.5 * np.arctanh(r)
    else:
        out = r * special.hyp2f1(0.5, c, 1.5, r * r)
    return out if out.ndim else float(out)


def _psi0_scalar(c: float, r: float) -> float:
    if abs(r) <= 0.9:
        # integration by parts: Psi(r) = r Psi'(r) - int_0^r w Psi''(w) dw
        if c == 1:
            tail = -0.5 * math.log1p(-r * r)
        else:
            tail = ((1.0 - r * r) ** (1.0 - c) - 1.0) / (2.0 * (c - 1.0))
        return r * float(psi1(c, r)) - tail
    sgn = math.copysign(1.0, r)
    head = _psi0_scalar(c, 0.9 * sgn)
    extra, _ = integrate.quad(lambda z: float(psi1(c, z)), 0.9 * sgn, r, epsabs=0.0, epsrel=1e-13, limit=200)
    return head + extra


def psi0(c: float, r):
    """``Psi_c(r)`` on ``(-1, 1)``."""
    r = np.asarray(r, dtype=float)
    _check_open(r)
    out = np.vectorize(lambda v: _psi0_scalar(c, float(v)), otypes=[float])(r)
    return out if out.ndim else float(out)


def eval_psi_family(c: float, r):
    """Return ``(Psi_c, Psi_c', Psi_c'')`` at ``r`` with ``|r| < 1``."""
    return psi0(c, r), psi1(c, r), psi2(c, r)


def _psi1_gap(c: float, u: float) -> float:
    """``Psi_c'(1 - u)`` for ``u`` in ``(0, 1]`` without forming ``1 - u``."""
    if u >= 0.5:
        return float(psi1(c, 1.0 - u))
    if c == 1:
        return 0.5 * math.log((2.0 - u) / u)
    if c == 2:
        return (1.0 - u) / (2.0 * u * (2.0 - u)) + 0.25 * math.log((2.0 - u) / u)
    # 1 - w^2 = v (2 - v) with v = 1 - w, integrated in log v
    head = float(psi1(c, 0.5))

    def f(t):
        v = math.exp(t)
        return math.exp((1.0 - c) * t - c * math.log(2.0 - v))

    try:
        extra, _ = integrate.quad(f, math.log(u), math.log(0.5), epsabs=0.0, epsrel=1e-13, limit=400)
    except OverflowError:
        return math.inf
    return head + extra


def inverse_psi1(c: float, value: float, tol: float = 1e-12) -> tuple[float, float]:
    """Solve ``Psi_c'(y) = value``; returns ``(y, 1 - |y|)``.

    The gap ``1 - |y|`` is returned separately because for large ``|value|``
    the root is closer to the barrier than double precision resolves.
    """
    if value == 0.0:
        return 0.0, 1.0
    target = abs(value)
    sgn = math.copysign(1.0, value)
    if target <= float(psi1(c, 0.5)):
        y = optimize.brentq(lambda v: float(psi1(c, v)) - target, 0.0, 0.5, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
        resid = float(psi1(c, y)) - target
        gap = 1.0 - y
    else:
        g = lambda t: _psi1_gap(c, math.exp(t)) - target  # noqa: E731
        hi = math.log(0.5)
        lo, width = hi - 1.0, 1.0
        floor = math.log(np.finfo(float).tiny)
        while g(lo) < 0:
            hi = lo
            width *= 2.0
            lo = hi - width
            if lo < floor:
                if g(floor) < 0:
                    raise RootFindingError(f"Psi'_{c} cannot reach {value}: root below the smallest representable gap")
                lo = floor
                break
        while not math.isfinite(g(lo)):
            lo = 0.5 * (lo + hi)
        t = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400)
        gap = math.exp(t)
        resid = g(t)
        y = 1.0 - gap
    if abs(resid) > tol * max(1.0, target):
        raise RootFindingError(f"inverse of Psi'_{c} at {value}: residual {resid:.3e} above tolerance")
    return sgn * y, gap


def eval_N(beta: float, gamma: float, r: float) -> float:
    """``N_{beta,gamma}(r) = r Psi_gamma'((Psi_beta')^{-1}(r))``."""
    if r == 0.0:
        return 0.0
    y, gap = inverse_psi1(beta, r)
    if gap < 0.5:
        inner = _psi1_gap(gamma, gap)
    else:
        inner = abs(float(psi1(gamma, y)))
    return abs(r) * inner


# ---------------------------------------------------------------------------
# Mollification
# ---------------------------------------------------------------------------


def bump(s):
    """Normalised mollifier ``rho`` on ``(-1, 1)``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = C_N * np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _tanh_sinh_rule(h: float, t_max: float = 3.3):
    t = np.arange(-t_max, t_max + 0.5 * h, h)
    u = 0.5 * math.pi * np.sinh(t)
    x = np.tanh(u)
    w = 0.5 * math.pi * h * np.cosh(t) / np.cosh(u) ** 2
    return x, w


def mollify(c: float, eps: float, r, derivative: bool = False, h: float = 1.0 / 32.0) -> np.ndarray:
    """``(rho_eps * m_c)(r)`` (or of ``m_c'``) by tanh-sinh quadrature.

    The integral ``int rho(s) m_c(r - eps s) ds`` is restricted to the part of
    ``(-1, 1)`` where ``|r - eps s| < 1`` so the integrand is smooth inside.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    a = np.maximum(-1.0, (r - 1.0) / eps)
    b = np.minimum(1.0, (r + 1.0) / eps)
    empty = b <= a
    x, w = _tanh_sinh_rule(h)
    mid = 0.5 * (a + b)
    half = 0.5 * np.where(empty, 0.0, b - a)
    s = mid[:, None] + half[:, None] * x[None, :]
    z = r[:, None] - eps * s
    base = np.clip(1.0 - z * z, 0.0, None)
    if derivative:
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(base > 0, -2.0 * c * z * base ** (c - 1.0), 0.0)
    else:
        vals = base**c
    out = (bump(s) * vals) @ w * half
    out[empty] = 0.0
    return out


def mollified_m(c: float, eps: float, r) -> np.ndarray:
    """Direct (non-tabulated) ``m_{c,eps}(r)``."""
    return mollify(c, eps, r) + eps**c


# ---------------------------------------------------------------------------
# Tabulated regularised family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialParams:
    exponent: float
    epsilon: float

    def __post_init__(self):
        if self.exponent < 0.5:
            raise ValueError("exponent must be >= 1/2")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class PotentialTable:
    """Cached evaluators for ``m_{c,eps}``, ``Psi_{c,eps}`` and derivatives.

    Build with :func:`potential_table`, which memoises on ``(c, eps)``.
    """

    params: PotentialParams
    spacing: float
    nodes: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)  # 1/m at nodes
    dq: np.ndarray = field(repr=False)  # d(1/m)/dr at nodes
    psi1_nodes: np.ndarray = field(repr=False)
    psi0_nodes: np.ndarray = field(repr=False)
    tolerance_report: dict = field(default_factory=dict, repr=False)

    @property
    def exponent(self) -> float:
        return self.params.exponent

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    @property
    def q_max(self) -> float:
        return self.epsilon ** (-self.exponent)

    def __post_init__(self):
        # per-cell power-basis coefficients in the local variable t in [0, 1]
        h = self.spacing
        q0, q1 = self.q[:-1], self.q[1:]
        d0, d1 = h * self.dq[:-1], h * self.dq[1:]
        c0 = q0
        c1 = d0
        c2 = -3.0 * q0 - 2.0 * d0 + 3.0 * q1 - d1
        c3 = 2.0 * q0 + d0 - 2.0 * q1 + d1
        p1 = self.psi1_nodes[:-1]
        coef = {
            2: (c0, c1, c2, c3),
            3: (c1 / h, 2.0 * c2 / h, 3.0 * c3 / h),
            1: (p1, h * c0, h * c1 / 2, h * c2 / 3, h * c3 / 4),
            0: (self.psi0_nodes[:-1], h * p1, h * h * c0 / 2, h * h * c1 / 6, h * h * c2 / 12, h * h * c3 / 20),
        }
        coef = {k: tuple(np.ascontiguousarray(a) for a in v) for k, v in coef.items()}
        object.__setattr__(self, "_coef", coef)
        object.__setattr__(self, "_inv_h", 1.0 / h)
        object.__setattr__(self, "_n_cells", self.nodes.shape[0] - 1)

    def _locate(self, r: np.ndarray):
        pos = (r - self.nodes[0]) * self._inv_h
        idx = pos.astype(np.intp)  # truncation equals floor for pos >= 0
        np.clip(idx, 0, self._n_cells - 1, out=idx)
        return idx, pos - idx

    @staticmethod
    def _horner(cs, idx, t):
        acc = cs[-1][idx]
        for c in cs[-2::-1]:
            acc *= t
            acc += c[idx]
        return acc

    def evaluate(self, r, order: tuple[int, ...] = (0, 1, 2)):
        """Evaluate selected derivatives of ``Psi`` (orders 0 to 3).

        Outside the tabulated interval the functions are continued with the
        constant ``Psi'' = eps^{-c}``, which is exact there since the
        convolution vanishes for ``|r| >= 1 + eps``.
        """
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        idx, t = self._locate(r)
        lo_edge, hi_edge = self.nodes[0], self.nodes[-1]
        outside = (r < lo_edge) | (r > hi_edge)
        any_out = bool(outside.any())
        if any_out:
            t = np.clip(t, 0.0, 1.0)
        out = {}
        for k in order:
            v = self._horner(self._coef[k], idx, t)
            if k == 2:
                # clip rounding-level overshoot so that Psi'' <= eps^{-c} holds exactly
                np.minimum(v, self.q_max, out=v)
            out[k] = v
        if any_out:
            left = r < lo_edge
            dr = np.where(outside, r - np.where(left, lo_edge, hi_edge), 0.0)
            qe = self.q_max
            e1 = np.where(left, self.psi1_nodes[0], self.psi1_nodes[-1])
            if 3 in out:
                out[3] = np.where(outside, 0.0, out[3])
            if 2 in out:
                out[2] = np.where(outside, qe, out[2])
            if 1 in out:
                out[1] = np.where(outside, e1 + qe * dr, out[1])
            if 0 in out:
                e0 = np.where(left, self.psi0_nodes[0], self.psi0_nodes[-1])
                out[0] = np.where(outside, e0 + e1 * dr + 0.5 * qe * dr * dr, out[0])
        res = tuple(float(out[k][0]) if scalar else out[k] for k in order)
        return res[0] if len(res) == 1 else res

    def psi(self, r):
        return self.evaluate(r, (0,))

    def dpsi(self, r):
        return self.evaluate(r, (1,))

    def d2psi(self, r):
        return self.evaluate(r, (2,))

    def d3psi(self, r):
        return self.evaluate(r, (3,))

    def m(self, r):
        return 1.0 / self.evaluate(r, (2,))

    def dm(self, r):
        q, dq = self.evaluate(r, (2, 3))
        return -dq / (q * q)

    def m_and_dm(self, r):
        q, dq = self.evaluate(r, (2, 3))
        m = 1.0 / q
        return m, -dq * m * m


def _build_table(c: float, eps: float, resolution: int) -> PotentialTable:
    h = eps / resolution
    radius = 1.0 + eps
    n = int(math.ceil(radius / h))
    half_nodes = np.arange(n + 1) * h
    conv = mollify(c, eps, half_nodes)
    dconv = mollify(c, eps, half_nodes, derivative=True)
    m_half = conv + eps**c
    nodes = np.concatenate([-half_nodes[:0:-1], half_nodes])
    m_nodes = np.concatenate([m_half[:0:-1], m_half])
    dm_nodes = np.concatenate([-dconv[:0:-1], dconv])
    q = np.minimum(1.0 / m_nodes, eps ** (-c))
    dq = -dm_nodes * q * q
    # exact cell integrals of the cubic Hermite interpolant
    q0, q1 = q[:-1], q[1:]
    d0, d1 = h * dq[:-1], h * dq[1:]
    c2 = -3.0 * q0 - 2.0 * d0 + 3.0 * q1 - d1
    c3 = 2.0 * q0 + d0 - 2.0 * q1 + d1
    cell1 = h * (q0 + d0 / 2 + c2 / 3 + c3 / 4)
    p1 = np.concatenate([[0.0], np.cumsum(cell1)])
    p1 -= p1[n]
    cell0 = p1[:-1] * h + h * h * (q0 / 2 + d0 / 6 + c2 / 12 + c3 / 20)
    p0 = np.concatenate([[0.0], np.cumsum(cell0)])
    p0 -= p0[n]
    for arr in (nodes, q, dq, p1, p0):
        arr.setflags(write=False)
    table = PotentialTable(PotentialParams(c, eps), h, nodes, q, dq, p1, p0)
    # interpolation error at cell midpoints against direct quadrature
    mids = 0.5 * (half_nodes[:-1] + half_nodes[1:])
    direct = 1.0 / (mollify(c, eps, mids) + eps**c)
    approx = table.d2psi(mids)
    rel = np.abs(approx - direct) / direct
    table.tolerance_report.update(
        max_rel_error_d2psi=float(rel.max()),
        min_d2psi=float(approx.min()),
        n_nodes=int(nodes.shape[0]),
    )
    return table


@lru_cache(maxsize=64)
def potential_table(c: float, eps: float, resolution: int = 200) -> PotentialTable:
    """Memoised :class:`PotentialTable` for ``m_{c,eps}`` with grid spacing ``eps/resolution``."""
    if not eps > 0:
        raise ValueError("tables are only built for eps > 0")
    PotentialParams(c, eps)
    return _build_table(float(c), float(eps), int(resolution))


def eval_regularized(table: PotentialTable, r):
    """Return ``(m, Psi, Psi', Psi'')`` of the regularised family at ``r``."""
    p0, p1, p2 = table.evaluate(r, (0, 1, 2))
    return 1.0 / p2, p0, p1, p2


# ---------------------------------------------------------------------------
# Pointwise implicit solve
# ---------------------------------------------------------------------------


def implicit_solve(table: PotentialTable, rhs: np.ndarray, dt: float, tol: float = 1e-14, max_iter: int = 60):
    """Solve ``r + dt Psi'(r) = rhs`` elementwise.

    ``Psi'`` is odd, increasing and convex on ``r > 0``, so Newton started from
    ``rhs`` converges monotonically inside the bracket between 0 and ``rhs``
    (iterates are clipped to it as a guard).  Each element stops
    iterating once its own update is below ``tol``, so results do not depend
    on what else shares the batch.  Returns ``(r, Psi''(r), iterations)``.
    """
    shape = np.shape(rhs)
    b = np.asarray(rhs, dtype=float).ravel()
    lo = np.minimum(b, 0.0)
    hi = np.maximum(b, 0.0)
    r = b.copy()
    n = b.shape[0]
    active = np.ones(n, dtype=bool)
    idx = None  # switch to an index subset once few elements remain
    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise RootFindingError(f"implicit potential solve did not converge in {max_iter} iterations")
        if idx is None:
            p1, p2 = table.evaluate(r, (1, 2))
            new = r - (r + dt * p1 - b) / (1.0 + dt * p2)
            np.clip(new, lo, hi, out=new)
            step = np.abs(new - r)
            r = np.where(active, new, r)
            active &= step > tol * np.maximum(1.0, np.abs(r))
            count = int(np.count_nonzero(active))
            if count == 0:
                break
            if 4 * count < n:
                idx = np.flatnonzero(active)
        else:
            ra = r[idx]
            p1, p2 = table.evaluate(ra, (1, 2))
            new = ra - (ra + dt * p1 - b[idx]) / (1.0 + dt * p2)
            np.clip(new, lo[idx], hi[idx], out=new)
            r[idx] = new
            idx = idx[np.abs(new - ra) > tol * np.maximum(1.0, np.abs(new))]
            if idx.size == 0:
                break
    return r.reshape(shape), table.d2psi(r).reshape(shape), it


# ---------------------------------------------------------------------------
# Property suite for the regularised family
# ---------------------------------------------------------------------------


@dataclass
class LemmaItem:
    """One checked property; ``lower``/``upper`` hold the measured values."""

    item: str
    exponents: tuple
    epsilon: float
    lower: float
    upper: float
    passed: bool
    detail: str = ""


def _sup_norm_dm(c: float) -> float:
    if c == 1:
        return 2.0
    # max of 2 c r (1-r^2)^{c-1} on [0, 1] sits at r^2 = 1/(2c-1)
    r = math.sqrt(1.0 / (2.0 * c - 1.0))
    return 2.0 * c * r * (1.0 - r * r) ** (c - 1.0)


def _ratio_item(name, exps, eps, num, den):
    ratio = num / den
    lo = float(np.min(ratio))
    hi = float(np.max(ratio))
    ok = bool(np.all(np.isfinite(ratio)) and lo > 0 and np.isfinite(hi))
    return LemmaItem(name, exps, eps, lo, hi, ok, "inf/sup of ratio")


def _k_star(tab_a, tab_b, tab_c, r, iters=200):
    """Largest ``K`` with ``Psi_a' Psi_b' >= K Psi_c'' - 1/K`` on the samples."""
    prod = tab_a.dpsi(r) * tab_b.dpsi(r)
    curv = tab_c.d2psi(r)

    def ok(k):
        return np.min(prod - k * curv + 1.0 / k) >= 0.0

    lo, hi = 1e-12, 1.0
    while ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            return math.inf
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-12:
            break
    return lo


def lemma_property_suite(
    epsilons=(0.2, 0.05),
    exponents=(1, 2, 3),
    barrier_band=(0.5, 1.0),
    n_samples: int = 4001,
    scan_radius: float = 10.0,
) -> list[LemmaItem]:
    """Check the structural properties of the regularised family.

    Exact statements are asserted pointwise:

    * (i)   sup of ``m_{c,eps}`` at most ``sup m_c + 1``, sup of ``|m'_{c,eps}|`` at most sup of ``|m_c'|``;
    * (ii)  ``m_{c,eps} >= eps^c`` (on direct quadrature values, not the table);
    * (iii) ``1/(sup m_c + 1) <= Psi''_{c,eps} <= eps^{-c}``, ``Psi'(0) = 0``,
      ``Psi'`` increasing and ``m Psi'' = 1``.

    Two-sided comparisons with unspecified constants report the empirical
    inf and sup of the ratio:

    * (iv)   ``|Psi'_c| / Psi''_{c-1}`` for ``c > 1``;
    * (v)    ``|Psi'_c| / Psi_{c+1}``, ``Psi''_c / Psi_{c+2}`` and ``|Psi'''_c| / Psi''_{c+1}``;
    * (viii) sup of ``Psi_{c,eps} / Psi_z`` and ``Psi''_{c,eps} / Psi''_z`` on ``(-1, 1)``, ``c <= z``;
    * (ix)   the largest ``K`` with ``Psi'_c Psi'_z >= K Psi''_{c+z-2} - 1/K`` on ``[-R, R]``.

    The ratios in (iv) and (v) degenerate at ``r = 0`` (numerators vanish)
    and, for (v), beyond ``|r| = 1 + eps`` where ``Psi'''`` vanishes, so they
    are sampled on ``barrier_band[0] <= |r| <= barrier_band[1]``, the region
    where the comparisons carry content.
    """
    results: list[LemmaItem] = []
    band = np.linspace(barrier_band[0], barrier_band[1], n_samples)
    band = np.concatenate([-band[::-1], band])
    line = np.linspace(-1.5, 1.5, 2 * n_samples + 1)
    scan = np.linspace(-scan_radius, scan_radius, 20 * n_samples + 1)
    inner = np.linspace(-0.999, 0.999, 2 * (n_samples // 8) + 1)
    inner = inner[inner != 0.0]
    exact_cache: dict = {}

    def exact(z):
        if z not in exact_cache:
            exact_cache[z] = (psi0(z, inner), psi2(z, inner))
        return exact_cache[z]

    for eps in epsilons:
        for c in exponents:
            tab = potential_table(c, eps)
            m_tab, dm_tab = tab.m_and_dm(line)
            sup_m = float(np.max(m_tab))
            sup_dm = float(np.max(np.abs(dm_tab)))
            ok = sup_m <= 2.0 and sup_dm <= _sup_norm_dm(c) * (1 + 1e-9)
            results.append(LemmaItem("i", (c,), eps, sup_m, sup_dm, bool(ok), f"sup m, sup |m'| (bound {_sup_norm_dm(c):.6g})"))

            floor_gap = float(np.min(mollify(c, eps, line)))
            results.append(
                LemmaItem("ii", (c,), eps, floor_gap, float(np.max(tab.d2psi(line))), bool(floor_gap >= 0.0), "min(m - eps^c), max 1/m")
            )

            p1, p2 = tab.evaluate(line, (1, 2))
            ok = (
                np.all(p2 >= 0.5)
                and np.all(p2 <= eps ** (-c))
                and float(tab.dpsi(np.array(0.0))) == 0.0
                and np.all(np.diff(p1) > 0)
                and np.max(np.abs(m_tab * p2 - 1.0)) <= 1e-10
            )
            results.append(LemmaItem("iii", (c,), eps, float(p2.min()), float(p2.max()), bool(ok), "range of Psi''"))

            if c > 1:
                low = potential_table(c - 1, eps)
                results.append(_ratio_item("iv", (c, c - 1), eps, np.abs(tab.dpsi(band)), low.d2psi(band)))
            t1 = potential_table(c + 1, eps)
            t2 = potential_table(c + 2, eps)
            p1b, p2b, p3b = tab.evaluate(band, (1, 2, 3))
            results.append(_ratio_item("v.1", (c, c + 1), eps, np.abs(p1b), t1.psi(band)))
            results.append(_ratio_item("v.2", (c, c + 2), eps, p2b, t2.psi(band)))
            results.append(_ratio_item("v.3", (c, c + 1), eps, np.abs(p3b), t1.d2psi(band)))

            for z in exponents:
                if z < c:
                    continue
                e0, e2 = exact(z)
                r0 = tab.psi(inner) / e0
                r2 = tab.d2psi(inner) / e2
                ok = bool(np.all(np.isfinite(r0)) and np.all(np.isfinite(r2)) and r0.min() > 0 and r2.min() > 0)
                results.append(LemmaItem("viii", (c, z), eps, float(r0.max()), float(r2.max()), ok, "sup Psi ratio, sup Psi'' ratio"))
                if c + z > 2:
                    k = _k_star(tab, potential_table(z, eps), potential_table(c + z - 2, eps), scan)
                    ok = bool(np.isfinite(k) and k > 0)
                    results.append(LemmaItem("ix", (c, z), eps, k, k, ok, f"K* on [-{scan_radius:g}, {scan_radius:g}]"))
    return results


def potential_table_rows(c: float, eps: float, r: np.ndarray) -> np.ndarray:
    """Columns ``(r, m, Psi, Psi', Psi'')`` for export."""
    r = np.asarray(r, dtype=float)
    if eps > 0:
        m, p0, p1, p2 = eval_regularized(potential_table(c, eps), r)
    else:
        p0, p1, p2 = eval_psi_family(c, r)
        m = eval_m(c, r)
    return np.column_stack([r, m, p0, p1, p2])
