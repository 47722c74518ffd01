"""Predicted log-determinant formulas.

Covers the classical strong Szego constant, the exact strong formula
(log-star diagonal plus corner constants built from the BCH-corrected
factor logarithms), the Euler-Maclaurin sum-to-integral conversion, the
semiclassical bulk/corner expansion for slowly varying symbols, the
locally-Toeplitz corollaries, the gauge split of bulk functionals, and
the block boundary formula.

Corner constants: with b = log* of the factors and d the BCH-corrected
combinations, the exact corner sum at anchor x is

  E_x = (1/2) sum_{m>=1} sum_{j=1}^m [ (b_+)_m (d_-)_{-m}
                                      + (d_+)_m (b_-)_{-m} ]  at X = x+j-(m+1)/2,

and log det T_n(a) = sum_{j<=n} ((log* a)_j)_0 + (E^R_{1/2} + E^L_{n+1/2})/2
up to exponentially small terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.integrate
import scipy.linalg

from . import phasefn as pf
from .errors import BranchCutError, QuadratureError, RangeError
from .moyal import BchOrder, WindowSpec, grid_scale, laurent_section, phi_bch, s_phi_margin, star_log
from .phasefn import MINUS, PLUS, TILDE, Leaf, Proj, pb
from .symbol import ProjectionKind, SmoothSymbol, SymbolGrid
from .wiener_hopf import LEFT, RIGHT, FactorPair


@dataclass(frozen=True)
class Prediction:
    """Predicted log det split into bulk, corner, and constant pieces."""

    bulk: complex
    corner_ul: complex
    corner_br: complex
    constant_terms: dict
    total: complex
    order_tags: tuple
    budgets: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.order_tags:
            raise ValueError("order_tags must be nonempty")
        check = self.bulk + self.corner_ul + self.corner_br + sum(
            self.constant_terms.values()
        )
        if abs(check - self.total) > 1e-9 * max(1.0, abs(self.total)):
            raise ValueError("total does not match the sum of its parts")

    @classmethod
    def assemble(cls, bulk=0.0, corner_ul=0.0, corner_br=0.0, constant_terms=None,
                 order_tags=(), budgets=None) -> "Prediction":
        constant_terms = dict(constant_terms or {})
        total = bulk + corner_ul + corner_br + sum(constant_terms.values())
        return cls(complex(bulk), complex(corner_ul), complex(corner_br),
                   constant_terms, complex(total), tuple(order_tags),
                   dict(budgets or {}))


# ---------------------------------------------------------------------------
# Euler-Maclaurin

_BERNOULLI_AT_1 = {1: Fraction(1, 6), 2: Fraction(-1, 30),
                   3: Fraction(1, 42), 4: Fraction(-1, 30)}


@dataclass(frozen=True)
class EMSeries:
    """Coefficients c_j = (1 - 2^{1-2j}) B_{2j}(1) / (2j)! of the
    midpoint Euler-Maclaurin correction series, exact rationals."""

    max_order: int

    def __post_init__(self):
        if not 1 <= self.max_order <= 4:
            raise ValueError("Bernoulli data tabulated up to order 8 (j <= 4)")

    @property
    def coefficients(self) -> tuple:
        out = []
        for j in range(1, self.max_order + 1):
            c = (1 - Fraction(1, 2 ** (2 * j - 1))) * _BERNOULLI_AT_1[j] / math.factorial(2 * j)
            out.append(c)
        return tuple(out)


def _quad_complex(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=500):
    def part(which):
        val, err, info, *rest = scipy.integrate.quad(
            lambda y: which(f(y)), a, b, epsabs=epsabs, epsrel=epsrel,
            limit=limit, full_output=True)
        if rest:
            raise QuadratureError(str(rest[0]))
        return val, err
    re, ree = part(np.real)
    im, ime = part(np.imag)
    return re + 1j * im, ree + ime


def euler_maclaurin_sum(g, n: int, nu: float, k: int, derivs: dict | None = None):
    """sum_{j=1}^n g(j nu) via the midpoint Euler-Maclaurin formula at
    order k: (1/nu) integral_{nu/2}^{(n+1/2)nu} [g - sum_j c_j nu^{2j}
    g^{(2j)}]; exact for polynomials of degree <= 2k."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    derivs = dict(derivs or {})
    from .symbol import fd_mixed_deriv

    dfuns = []
    coefs = EMSeries(k).coefficients if k >= 1 else ()
    for j in range(1, k + 1):
        order = 2 * j
        if order in derivs:
            dfuns.append(derivs[order])
        else:
            fd = fd_mixed_deriv(lambda y, _p, _g=g: _g(y), order, 0)
            dfuns.append(lambda y, _fd=fd: _fd(y, 0.0))

    def integrand(y):
        val = g(y)
        for j, cf in enumerate(coefs, start=1):
            val = val - float(cf) * nu ** (2 * j) * dfuns[j - 1](y)
        return val

    total, err = _quad_complex(integrand, nu / 2.0, (n + 0.5) * nu)
    return total / nu


# ---------------------------------------------------------------------------
# classical pieces


def _log_on_circle(c: SymbolGrid, n_p: int):
    K = c.band
    k = np.arange(-K, K + 1)
    p = 2.0 * np.pi * np.arange(n_p) / n_p
    vals = c.coeffs[0] @ np.exp(1j * np.outer(k, p))
    if np.abs(vals).min() < 1e-300:
        raise BranchCutError("symbol vanishes on the circle")
    phase_closed = np.unwrap(np.angle(np.append(vals, vals[0])))
    winding = round((phase_closed[-1] - phase_closed[0]) / (2.0 * np.pi))
    logv = np.log(np.abs(vals)) + 1j * phase_closed[:-1]
    return logv, int(winding)


def e_classical(c: SymbolGrid, n_p: int = 1024) -> complex:
    """Strong Szego constant E(a) = sum_{k>=1} k (log a)_k (log a)_{-k}
    of an x-independent symbol with zero winding number."""
    scale = max(c.max_abs(relevant_only=False), 1e-300)
    if c.n_x > 1:
        spread = np.abs(c.coeffs - c.coeffs[0]).max()
        if spread > 1e-10 * scale:
            raise RangeError("e_classical requires an x-independent symbol")
    logv, winding = _log_on_circle(c, n_p)
    if winding != 0:
        raise BranchCutError(f"winding number {winding} != 0")
    hat = np.fft.fft(logv) / n_p
    ks = np.arange(1, n_p // 2)
    return complex(np.sum(ks * hat[ks] * hat[n_p - ks]))


def weak_ratio_prediction(factors: FactorPair, n: int) -> complex:
    """(a_{+,n}^L)_0 (a_{-,n}^L)_0, the predicted det T_n / det T_{n-1}."""
    if factors.side != LEFT:
        raise ValueError("weak ratio uses the left factorization")
    return factors.plus.coeff(n, 0) * factors.minus.coeff(n, 0)


# ---------------------------------------------------------------------------
# exact strong formula


def log_star_diagonal(a: SymbolGrid, n: int, win: WindowSpec) -> np.ndarray:
    """((log* a)_j)_0 for j = 1..n from the matrix log of a padded
    section of L(a)."""
    j0, j1 = 1 - win.margin, n + win.margin
    M = laurent_section(a, j0, j1)
    eigs = np.linalg.eigvals(M)
    scale = float(np.abs(eigs).max())
    dist = np.where(eigs.real <= 0.0, np.abs(eigs.imag), np.abs(eigs)).min()
    if dist < win.tol * scale:
        raise BranchCutError("section spectrum touches the log branch cut")
    L = scipy.linalg.logm(M)
    diag = np.diag(L)
    return diag[win.margin - 1 + 1 : win.margin - 1 + 1 + n].copy()


def corner_constant(b_plus: SymbolGrid, b_minus: SymbolGrid,
                    d_plus: SymbolGrid, d_minus: SymbolGrid,
                    x, tol: float = 1e-14) -> tuple[complex, float]:
    """The exact corner sum E_x and the truncation bound at the stopping
    index."""
    from .symbol import as_tx

    tx0 = as_tx(x)
    m_cap = min(b_plus.band, d_minus.band, d_plus.band, b_minus.band)
    total = 0.0 + 0.0j
    bound = 0.0
    for m in range(1, m_cap + 1):
        term = 0.0 + 0.0j
        ok = True
        for j in range(1, m + 1):
            tx = tx0 + 2 * j - m - 1
            for g in (b_plus, d_minus, d_plus, b_minus):
                if tx < g.tx_min or tx > g.tx_max:
                    ok = False
            if not ok:
                break
            X = tx / 2.0
            term += b_plus.coeff(X, m) * d_minus.coeff(X, -m)
            term += d_plus.coeff(X, m) * b_minus.coeff(X, -m)
        if not ok:
            raise RangeError(
                f"factor grids too short for the corner sum at x={x}, m={m}")
        total += term
        bound = m * (
            np.abs(b_plus.col(m)).max() * np.abs(d_minus.col(-m)).max()
            + np.abs(d_plus.col(m)).max() * np.abs(b_minus.col(-m)).max()
        )
        if m >= 4 and bound < tol * max(1.0, abs(total)):
            break
    return 0.5 * total, float(bound)


def _corner_data(pair: FactorPair, bch: BchOrder, win: WindowSpec):
    b_m = star_log(pair.minus, win)
    b_p = star_log(pair.plus, win)
    if pair.side == RIGHT:
        d_p = phi_bch(b_m, b_p, bch)
        d_m = grid_scale(phi_bch(grid_scale(b_p, -1.0), grid_scale(b_m, -1.0), bch), -1.0)
    else:
        d_m = phi_bch(b_p, b_m, bch)
        d_p = grid_scale(phi_bch(grid_scale(b_m, -1.0), grid_scale(b_p, -1.0), bch), -1.0)
    return b_p, b_m, d_p, d_m


def strong_formula(a: SymbolGrid, n: int, left: FactorPair, right: FactorPair,
                   bch: BchOrder = BchOrder(2), win: WindowSpec = WindowSpec()) -> Prediction:
    """Exact-route strong prediction: matrix-log diagonal bulk plus the
    corner constants (E^R_{1/2} + E^L_{n+1/2})/2 from the BCH-corrected
    factor logarithms.

    The Phi truncation budget is the accumulated drift of the corner
    constants across the implemented BCH orders: for symbols without a
    small inhomogeneity parameter the BCH series is merely asymptotic,
    so the drift scale -- not a geometric tail -- is the honest
    uncertainty.  The S_Phi sufficient condition is only flagged.
    """
    if left.side != LEFT or right.side != RIGHT:
        raise ValueError("need a Left and a Right factor pair")
    bulk = complex(np.sum(log_star_diagonal(a, n, win)))
    e_by_order = []
    m_bound = 0.0
    for order in range(bch.order + 1):
        bo = BchOrder(order)
        bR_p, bR_m, dR_p, dR_m = _corner_data(right, bo, win)
        eR, bnd1 = corner_constant(bR_p, bR_m, dR_p, dR_m, 0.5)
        bL_p, bL_m, dL_p, dL_m = _corner_data(left, bo, win)
        eL, bnd2 = corner_constant(bL_p, bL_m, dL_p, dL_m, n + 0.5)
        e_by_order.append((eR, eL))
        m_bound = max(bnd1, bnd2)
    eR, eL = e_by_order[-1]
    totals = [(r + l) / 2.0 for r, l in e_by_order]
    phi_est = float(sum(abs(t2 - t1) for t1, t2 in zip(totals, totals[1:])))
    sphi_R = s_phi_margin(star_log(right.minus, win), star_log(right.plus, win))
    sphi_L = s_phi_margin(star_log(left.plus, win), star_log(left.minus, win))
    budgets = {
        "corner_m_bound": m_bound,
        "phi_truncation_estimate": phi_est,
        "s_phi_bound_right": sphi_R[0],
        "s_phi_bound_left": sphi_L[0],
        "s_phi_ok": bool(sphi_R[1] and sphi_L[1]),
    }
    return Prediction.assemble(
        bulk=bulk, corner_ul=eR / 2.0, corner_br=eL / 2.0,
        order_tags=("log-star-diagonal", f"bch-{bch.order}"),
        budgets=budgets,
    )


# ---------------------------------------------------------------------------
# semiclassical prediction (slowly varying symbols)


def _fast_leaf(s: SmoothSymbol, x: float, p_grid: np.ndarray):
    """Fast-coordinate leaves: each x-derivative carries a power of nu."""
    nu = s.nu
    cache = {}

    def leaf(m1, m2):
        key = (m1, m2)
        if key not in cache:
            cache[key] = nu ** m1 * np.asarray(
                s.log_deriv(m1, m2)(x * nu, p_grid), dtype=np.complex128)
        return cache[key]

    return leaf


def _mean_p(expr, s: SmoothSymbol, x: float, n_p: int) -> complex:
    p_grid = 2.0 * np.pi * np.arange(n_p) / n_p
    vals = expr.ev(_fast_leaf(s, x, p_grid), pf.fourier_project)
    return complex(np.mean(vals))


def _bulk_expr(with_d2: bool):
    g = Leaf(0, 0)
    expr = g
    if with_d2:
        detH = Leaf(2, 0) * Leaf(0, 2) - Leaf(1, 1) * Leaf(1, 1)
        expr = expr + (-1.0 / 12.0) * (g * detH)
    return expr


def _corner_exprs(with_c1: bool):
    g = Leaf(0, 0)
    c0 = (-0.25j) * (g * Proj(Leaf(0, 1), TILDE))
    c1 = None
    if with_c1:
        t1 = Proj(Leaf(1, 0), TILDE)
        t2 = Proj(Leaf(0, 1), TILDE)
        c1 = (1.0 / 24.0) * (
            2.0 * (t1 * Leaf(0, 1) * t2)
            + Leaf(1, 0) * (pf.Const(-1.0) + 3.0 * Leaf(0, 2)
                            + 2.0 * (g * Leaf(0, 2))
                            + Leaf(0, 1) * Leaf(0, 1)
                            - 2.0 * (t2 * t2))
        )
    return c0, c1


def bulk_density(s: SmoothSymbol, x: float, with_d2: bool = True,
                 n_p: int = 256) -> complex:
    """(1/2pi) integral of the bulk integrand over p at fixed x."""
    return _mean_p(_bulk_expr(with_d2), s, x, n_p)


def corner_density(s: SmoothSymbol, x: float, sign: int,
                   with_c1: bool = True, n_p: int = 256) -> complex:
    """(1/2pi) integral over p of the corner integrand at fixed x; sign
    -1 for the upper-left corner, +1 for the bottom-right one."""
    c0, c1 = _corner_exprs(with_c1)
    val = _mean_p(c0, s, x, n_p)
    if with_c1 and c1 is not None:
        val = val + sign * _mean_p(c1, s, x, n_p)
    return val


def semiclassical_prediction(s: SmoothSymbol, n: int,
                             orders=("d0", "d2", "c0", "c1"),
                             n_p: int = 256) -> Prediction:
    """Bulk + corner prediction of log det T_n for a slowly varying
    symbol, with selectable orders d0, d2, c0, c1.

    There is no odd bulk term: the expansion jumps from d0 to d2 by
    construction.
    """
    orders = tuple(o.lower() for o in orders)
    known = {"d0", "d2", "c0", "c1"}
    if not set(orders) <= known or not orders:
        raise ValueError(f"orders must be a nonempty subset of {sorted(known)}")
    bulk = 0.0 + 0.0j
    if "d0" in orders or "d2" in orders:
        expr = _bulk_expr("d2" in orders)
        if "d0" not in orders:
            expr = _bulk_expr(True) - _bulk_expr(False)

        def integrand(x):
            return _mean_p(expr, s, x, n_p)

        bulk, _ = _quad_complex(integrand, 0.5, n + 0.5, epsabs=1e-11, epsrel=1e-11)
    corner_ul = corner_br = 0.0 + 0.0j
    if "c0" in orders or "c1" in orders:
        c0, c1 = _corner_exprs("c1" in orders)
        ul = _mean_p(c0, s, 0.5, n_p) if "c0" in orders else 0.0
        br = _mean_p(c0, s, n + 0.5, n_p) if "c0" in orders else 0.0
        if "c1" in orders:
            ul = ul - _mean_p(c1, s, 0.5, n_p)
            br = br + _mean_p(c1, s, n + 0.5, n_p)
        corner_ul, corner_br = ul, br
    return Prediction.assemble(
        bulk=bulk, corner_ul=corner_ul, corner_br=corner_br,
        order_tags=orders, budgets={"n_p": n_p},
    )


# ---------------------------------------------------------------------------
# locally-q Toeplitz corollaries


def _e_from_log_values(logv: np.ndarray) -> complex:
    n_p = logv.shape[-1]
    hat = np.fft.fft(logv) / n_p
    ks = np.arange(1, n_p // 2)
    return complex(np.sum(ks * hat[ks] * hat[n_p - ks]))


def _richardson_limit(f, ts=(1e-2, 1e-3, 1e-4)):
    """Extrapolate f(t) -> f(0) assuming a smooth expansion in t."""
    vals = [f(t) for t in ts]
    ts = np.asarray(ts, dtype=float)
    V = np.vander(ts, 3, increasing=True)  # [1, t, t^2]
    coef = np.linalg.solve(V, np.asarray(vals))
    return coef[0]


def locally_toeplitz_prediction(g, n: int, n_p: int = 256) -> Prediction:
    """Tilli-class prediction: boundary strong-Szego constants plus the
    plane average of g; g is the exponent on (0,1) x circle."""
    p_grid = 2.0 * np.pi * np.arange(n_p) / n_p

    def gv(t):
        return np.asarray(g(t, p_grid), dtype=np.complex128)

    e0 = _richardson_limit(lambda t: _e_from_log_values(gv(t)))
    e1 = _richardson_limit(lambda t: _e_from_log_values(gv(1.0 - t)))

    def integrand(t):
        return complex(np.mean(gv(t)))

    avg, _ = _quad_complex(integrand, 0.0, 1.0)
    return Prediction.assemble(
        bulk=n * avg,
        constant_terms={"E_classical_0": e0 / 2.0, "E_classical_1": e1 / 2.0},
        order_tags=("d0", "c0"),
    )


def locally_half_prediction(s: SmoothSymbol, n: int, n_p: int = 256) -> Prediction:
    """Diffusive-class prediction (locally-1/2 sequences): boundary
    constants, the d2 bulk correction with its 1/sqrt(n) weight, and the
    sqrt(n)-scaled plane average.

    ``s`` wraps the exponent g(t, p) on R_+ x circle (nu is not used).
    """
    rn = math.sqrt(n)
    p_grid = 2.0 * np.pi * np.arange(n_p) / n_p
    g = s.log_deriv(0, 0)

    def gv(t):
        return np.asarray(g(t, p_grid), dtype=np.complex128)

    e0 = _richardson_limit(lambda t: _e_from_log_values(gv(t)))
    e1 = _e_from_log_values(gv(rn))

    def avg_g(t):
        return complex(np.mean(gv(t)))

    def avg_gdeth(t):
        g11 = np.asarray(s.log_deriv(2, 0)(t, p_grid))
        g22 = np.asarray(s.log_deriv(0, 2)(t, p_grid))
        g12 = np.asarray(s.log_deriv(1, 1)(t, p_grid))
        return complex(np.mean(gv(t) * (g11 * g22 - g12 ** 2)))

    bulk_avg, _ = _quad_complex(avg_g, 0.0, rn, epsabs=1e-11, epsrel=1e-11)
    d2_avg, _ = _quad_complex(avg_gdeth, 0.0, rn, epsabs=1e-11, epsrel=1e-11)
    return Prediction.assemble(
        bulk=rn * bulk_avg,
        constant_terms={
            "E_classical_0": e0 / 2.0,
            "E_classical_sqrt_n": e1 / 2.0,
            "D2": -d2_avg / (12.0 * rn),
        },
        order_tags=("d0", "d2", "c0"),
    )


# ---------------------------------------------------------------------------
# gauge split


def gauge_split(monomial, s: SmoothSymbol, n: int, n_p: int = 128) -> dict:
    """Split the bulk functional of a derivative monomial into its gauge
    bulk part and the boundary remainder: F = G + Delta.

    ``monomial`` is a list of (c_i, d_i) derivative multi-indices; g is
    taken from the exponent of ``s`` at unit scale (slow = fast).
    """
    monomial = [tuple(map(int, cd)) for cd in monomial]
    k = len(monomial)
    if k == 0:
        raise ValueError("monomial must be nonempty")
    F_expr = pf.Prod([Leaf(c, d) for c, d in monomial])

    def others(j):
        return [Leaf(c, d) for i, (c, d) in enumerate(monomial) if i != j]

    G_terms = []
    for j, (cj, dj) in enumerate(monomial):
        e = pf.Prod(others(j)) if k > 1 else pf.Const(1.0)
        for _ in range(cj):
            e = pf.Scale(-1.0, e.d(0))
        for _ in range(dj):
            e = pf.Scale(-1.0, e.d(1))
        G_terms.append(e)
    G_expr = Leaf(0, 0) * pf.Scale(1.0 / k, pf.Sum(G_terms))

    delta_terms = []
    for j, (cj, dj) in enumerate(monomial):
        base = pf.Prod(others(j)) if k > 1 else pf.Const(1.0)
        for eta in range(cj):
            e = base
            for _ in range(cj - eta - 1):
                e = e.d(0)
            sign = (-1.0) ** (cj - eta - 1)
            delta_terms.append(pf.Scale(sign / k, Leaf(eta, dj) * e))
    Delta_expr = pf.Sum(delta_terms) if delta_terms else pf.Const(0.0)

    # the exponent is used at unit scale here: slow and fast x coincide
    p_grid = 2.0 * np.pi * np.arange(n_p) / n_p

    def mean_at(expr, x):
        leaf = pf.make_leaf_eval(s, float(x), p_grid)
        return complex(np.mean(expr.ev(leaf, pf.fourier_project)))

    F, _ = _quad_complex(lambda x: mean_at(F_expr, x), 0.5, n + 0.5)
    G, _ = _quad_complex(lambda x: mean_at(G_expr, x), 0.5, n + 0.5)
    Delta = mean_at(Delta_expr, n + 0.5) - mean_at(Delta_expr, 0.5)
    return {"F": F, "G": G, "Delta": Delta, "mismatch": abs(F - (G + Delta))}


# ---------------------------------------------------------------------------
# block boundary formula


def block_boundary_formula(betaL, betaR, gammaL, gammaR, n: int,
                           trace_bulk: np.ndarray, n_p: int = 256) -> Prediction:
    """n tr[(log a)_0] - (i/4) (1/2pi) integral tr[beta_R gamma_R' +
    beta_L' gamma_L], derivatives by spectral differentiation.

    The four matrix-valued circle functions come from the caller (the
    library does not compute block Wiener-Hopf factorizations).
    """
    p = 2.0 * np.pi * np.arange(n_p) / n_p

    def sample(f):
        return np.stack([np.asarray(f(pj), dtype=np.complex128) for pj in p])

    def dp(vals):
        modes = np.fft.fftfreq(n_p, d=1.0 / n_p)
        hat = np.fft.fft(vals, axis=0)
        return np.fft.ifft(1j * modes[:, None, None] * hat, axis=0)

    bR, bL = sample(betaR), sample(betaL)
    gR, gL = sample(gammaR), sample(gammaL)
    if not (bR.shape == bL.shape == gR.shape == gL.shape):
        raise ValueError("dimension mismatch between the factor functions")
    integrand = np.einsum("pij,pji->p", bR, dp(gR)) + np.einsum("pij,pji->p", dp(bL), gL)
    boundary = -0.25j * np.mean(integrand)
    bulk = n * complex(np.trace(np.asarray(trace_bulk, dtype=np.complex128)))
    return Prediction.assemble(
        bulk=bulk, constant_terms={"boundary": complex(boundary)},
        order_tags=("block-bulk", "block-boundary"),
    )


# ---------------------------------------------------------------------------
# asymptotic corner constants (alternative path)


def corner_constant_asymptotic(s: SmoothSymbol, side: str, x, include_nu2: bool = True,
                               n_p: int = 256) -> complex:
    """E_x from the semiclassical expansion: order-1 components
    g^{R/L} = g +- (i nu/2){g^-, g^+}, h^{R/L} = g +- (i nu/6){g^-, g^+},
    in the two displayed orders (nu^0 and the nu^2/48 term).

    Cross-checks the exact corner sum on smooth symbols; accuracy is
    limited by the order of the components.
    """
    sig = 1.0 if side == RIGHT else -1.0
    nu = s.nu
    B = pb(pf.gminus(), pf.gplus())
    G = Leaf(0, 0) + (0.5j * sig * nu) * B
    H = Leaf(0, 0) + (sig * 1j * nu / 6.0) * B
    Ht = Proj(H, TILDE)
    e0_expr = (-0.5j) * (G * Ht.d(1))
    val = _slow_mean(e0_expr, s, x, n_p)
    if include_nu2:
        inner = G * (Ht.d(1) + Ht.d(1).d(1).d(1))
        e2_expr = (1j * nu ** 2 / 48.0) * inner.d(0).d(0)
        val = val + _slow_mean(e2_expr, s, x, n_p)
    return val


def _slow_mean(expr, s: SmoothSymbol, x, n_p: int) -> complex:
    p_grid = 2.0 * np.pi * np.arange(n_p) / n_p
    leaf = pf.make_leaf_eval(s, float(x) * s.nu, p_grid)
    vals = expr.ev(leaf, pf.fourier_project)
    return complex(np.mean(vals))
