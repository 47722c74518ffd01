"""Left and right Wiener-Hopf star factorizations.

Three routes are provided:

* exact closed forms for tridiagonal symbols,
* windowed no-pivot LU / UL elimination on finite sections of L(a) for
  general banded symbols (the triangular factors of the section converge
  to the star factors away from the eliminated corner),
* the semiclassical expansion of the factors for smooth symbols.

Conventions: the right factorization is a = minus * plus, the left one
a = plus * minus, and the minus factor carries unit zeroth coefficient
per grid point, which also pins the numeric elimination (the unit
diagonal goes on the triangle realizing the minus symbol).  Pivoting is
inadmissible (it would destroy the triangular-symbol correspondence), so
tiny pivots abort with a winding-number diagnosis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import phasefn as pf
from .errors import FactorizationError, RangeError
from .moyal import WindowSpec, laurent_section, read_symbol_from_matrix, section_bounds, star_product
from .phasefn import MINUS, PLUS, Leaf, Proj, pb
from .symbol import (
    SmoothSymbol,
    SymbolGrid,
    as_tx,
    grid_binop,
    unit_symbol,
)

LEFT = "Left"
RIGHT = "Right"


def _sigma(side: str) -> float:
    if side == RIGHT:
        return 1.0
    if side == LEFT:
        return -1.0
    raise ValueError(f"side must be {LEFT!r} or {RIGHT!r}")


@dataclass(frozen=True)
class FactorPair:
    """Wiener-Hopf star factors; right: a = minus * plus, left:
    a = plus * minus, with (minus_x)_0 = 1."""

    minus: SymbolGrid
    plus: SymbolGrid
    side: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    def reconstruction(self) -> SymbolGrid:
        if self.side == RIGHT:
            return star_product(self.minus, self.plus)
        return star_product(self.plus, self.minus)

    def residual_vs(self, a: SymbolGrid) -> float:
        rec = self.reconstruction()
        d = grid_binop(rec, a, 1.0, -1.0)
        return d.max_abs(relevant_only=True)


# ---------------------------------------------------------------------------
# tridiagonal closed forms


@dataclass(frozen=True)
class TridiagonalSpec:
    """Data of a tridiagonal symbol: diagonal evaluator f0 and
    off-diagonal evaluators f1 (lower) and fm1 (upper), with their limits
    at -inf/+inf for the winding check."""

    f0: Callable[[float], complex]
    f1: Callable[[float], complex]
    fm1: Callable[[float], complex]
    f0_limits: tuple = (1.0, 1.0)
    f1_limits: tuple = (0.0, 0.0)
    fm1_limits: tuple = (0.0, 0.0)

    @classmethod
    def constant(cls, f0, f1, fm1) -> "TridiagonalSpec":
        return cls(
            f0=lambda x: f0 + 0.0 * x,
            f1=lambda x: f1 + 0.0 * x,
            fm1=lambda x: fm1 + 0.0 * x,
            f0_limits=(f0, f0),
            f1_limits=(f1, f1),
            fm1_limits=(fm1, fm1),
        )

    def zero_star_winding(self) -> bool:
        c1 = abs(self.fm1_limits[0] * self.fm1_limits[1]) < 1.0
        c2 = abs(self.f1_limits[0] * self.f1_limits[1]) < abs(
            self.f0_limits[0] * self.f0_limits[1]
        )
        return c1 and c2

    def gap(self, x: float) -> complex:
        """f0(x) - fm1(x+1/2) f1(x+1/2), the recurring denominator."""
        return self.f0(x) - self.fm1(x + 0.5) * self.f1(x + 0.5)


def _tridiag_grid(x_min, x_max, c_m1, c_0, c_p1) -> SymbolGrid:
    lo, hi = as_tx(x_min), as_tx(x_max)
    xs = (lo + np.arange(hi - lo + 1)) / 2.0
    coeffs = np.stack(
        [np.asarray(c_m1(xs), dtype=np.complex128),
         np.asarray(c_0(xs), dtype=np.complex128),
         np.asarray(c_p1(xs), dtype=np.complex128)], axis=1
    )
    K = 1
    from .symbol import fit_decay

    return SymbolGrid(lo, coeffs, fit_decay(coeffs, K))


def tridiagonal_symbol(spec: TridiagonalSpec, x_min, x_max,
                       denom_tol: float = 1e-12) -> SymbolGrid:
    """Band-1 symbol whose L(a) is the tridiagonal matrix generated by
    the spec (the displayed tridiagonal representative)."""
    xs_probe = np.arange(as_tx(x_min) - 2, as_tx(x_max) + 3) / 2.0
    gaps = np.abs([spec.gap(x) for x in xs_probe])
    if gaps.min() < denom_tol:
        raise FactorizationError("near-singular tridiagonal spec: gap below tolerance")

    def c0(x):
        num = spec.f0(x - 1) * spec.f0(x) - (
            spec.fm1(x - 0.5) * spec.f1(x - 0.5) * spec.fm1(x + 0.5) * spec.f1(x + 0.5)
        )
        return num / (spec.f0(x - 1) - spec.fm1(x - 0.5) * spec.f1(x - 0.5))

    def cm1(x):
        num = spec.f0(x + 0.5) - spec.fm1(x + 1) * spec.f1(x + 1)
        den = spec.f0(x - 0.5) - spec.fm1(x) * spec.f1(x)
        return spec.fm1(x) * spec.f0(x - 0.5) * num / den

    return _tridiag_grid(x_min, x_max, cm1, c0, lambda x: spec.f1(x) + 0.0 * x)


def tridiagonal_factorize(spec: TridiagonalSpec, side: str, x_min, x_max,
                          denom_tol: float = 1e-12) -> FactorPair:
    """Closed-form factors of the tridiagonal symbol.

    Right: minus = 1 + fm1(x) e^{-ip},
           plus  = f0(x-1) [f0(x) - beta(x+1/2)] / [f0(x-1) - beta(x-1/2)]
                   + f1(x) e^{ip};
    left:  plus  = f0(x) + f1(x) e^{ip},
           minus = 1 + fm1(x) [f0(x+1/2) - beta(x+1)] /
                   [f0(x-1/2) - beta(x)] e^{-ip},
    with beta = fm1 * f1.
    """
    _sigma(side)  # validates the side string
    xs_probe = np.arange(as_tx(x_min) - 2, as_tx(x_max) + 3) / 2.0
    if np.abs([spec.gap(x) for x in xs_probe]).min() < denom_tol:
        raise FactorizationError("near-singular tridiagonal spec: gap below tolerance")

    beta = lambda x: spec.fm1(x) * spec.f1(x)
    zero = lambda x: 0.0 * x
    one = lambda x: 1.0 + 0.0 * x
    if side == RIGHT:
        minus = _tridiag_grid(x_min, x_max, lambda x: spec.fm1(x) + zero(x), one, zero)

        def plus0(x):
            return spec.f0(x - 1) * (spec.f0(x) - beta(x + 0.5)) / (
                spec.f0(x - 1) - beta(x - 0.5)
            )

        plus = _tridiag_grid(x_min, x_max, zero, plus0, lambda x: spec.f1(x) + zero(x))
    else:
        plus = _tridiag_grid(x_min, x_max, zero, lambda x: spec.f0(x) + zero(x),
                             lambda x: spec.f1(x) + zero(x))

        def minus_m1(x):
            return spec.fm1(x) * (spec.f0(x + 0.5) - beta(x + 1)) / (
                spec.f0(x - 0.5) - beta(x)
            )

        minus = _tridiag_grid(x_min, x_max, minus_m1, one, zero)
    return FactorPair(minus=minus, plus=plus, side=side,
                      diagnostics={"method": "closed-form"})


# ---------------------------------------------------------------------------
# numeric factorization


def _crout(A: np.ndarray, ptol: float):
    """A = Lo @ U with U unit upper triangular; no pivoting."""
    n = A.shape[0]
    Lo = np.zeros_like(A)
    U = np.eye(n, dtype=A.dtype)
    scale = float(np.abs(A).max())
    pmin = np.inf
    for k in range(n):
        Lo[k:, k] = A[k:, k] - Lo[k:, :k] @ U[:k, k]
        piv = Lo[k, k]
        pmin = min(pmin, abs(piv))
        if abs(piv) < ptol * scale:
            raise FactorizationError(
                f"pivot {abs(piv):.2e} below threshold at step {k}: "
                "nonzero star winding number suspected"
            )
        if k + 1 < n:
            U[k, k + 1:] = (A[k, k + 1:] - Lo[k, :k] @ U[:k, k + 1:]) / piv
    return Lo, U, pmin


def _doolittle(A: np.ndarray, ptol: float):
    """A = L @ U with L unit lower triangular; no pivoting."""
    n = A.shape[0]
    L = np.eye(n, dtype=A.dtype)
    U = np.zeros_like(A)
    scale = float(np.abs(A).max())
    pmin = np.inf
    for k in range(n):
        U[k, k:] = A[k, k:] - L[k, :k] @ U[:k, k:]
        piv = U[k, k]
        pmin = min(pmin, abs(piv))
        if abs(piv) < ptol * scale:
            raise FactorizationError(
                f"pivot {abs(piv):.2e} below threshold at step {k}: "
                "nonzero star winding number suspected"
            )
        if k + 1 < n:
            L[k + 1:, k] = (A[k + 1:, k] - L[k + 1:, :k] @ U[:k, k]) / piv
    return L, U, pmin


def numeric_factorize(a: SymbolGrid, side: str, win: WindowSpec,
                      pivot_tol: float = 1e-12) -> FactorPair:
    """Windowed triangular elimination on the truncated L(a).

    Left side is a Crout LU (unit diagonal on the upper factor); the
    right side is the UL decomposition, realized as the LU of the
    index-reversed section.  Factors are read back along antidiagonals
    and ``win.margin`` sites are discarded at each end, where the finite
    section contaminates the triangles.
    """
    _sigma(side)
    j0, j1 = section_bounds(a)
    M = laurent_section(a, j0, j1)
    if side == LEFT:
        Lo, U, pmin = _crout(M, pivot_tol)
        plus_m, minus_m = Lo, U
    else:
        B = M[::-1, ::-1]
        Lt, Ut, pmin = _doolittle(B, pivot_tol)
        minus_m = Lt[::-1, ::-1]
        plus_m = Ut[::-1, ::-1]
    band_cap = max(8, int(math.ceil(math.log(1e-16) / math.log(min(max(a.decay_rho, 1e-6), 0.95)))))
    minus = read_symbol_from_matrix(minus_m, j0, win.margin, band_cap=band_cap)
    plus = read_symbol_from_matrix(plus_m, j0, win.margin, band_cap=band_cap)
    pair = FactorPair(minus=minus, plus=plus, side=side,
                      diagnostics={"method": "numeric", "pivot_min": pmin,
                                   "margin": win.margin})
    try:
        pair.diagnostics["residual"] = pair.residual_vs(a)
    except RangeError:
        pass
    return pair


# ---------------------------------------------------------------------------
# semiclassical expansion of the factors


def _psi_exprs(side: str) -> list:
    """Explicit psi_0, psi_1, psi_2 expression trees (psi_2 is
    side-independent)."""
    sig = _sigma(side)
    gm, gp = pf.gminus(), pf.gplus()
    B = pb(gm, gp)
    psi1 = (0.5j * sig) * B
    Bm, Bp = Proj(B, MINUS), Proj(B, PLUS)
    g1m, g1p = Proj(Leaf(1, 0), MINUS), Proj(Leaf(1, 0), PLUS)
    g2m, g2p = Proj(Leaf(0, 1), MINUS), Proj(Leaf(0, 1), PLUS)
    psi2 = (
        0.5 * (Bm * Bp)
        - 0.25 * (B * B)
        + 0.5 * pb(gp, Bm)
        - 0.5 * pb(gm, Bp)
        - 0.25 * (g2m * pb(gm, g1p) - g1m * pb(gm, g2p)
                  + g1p * pb(g2m, gp) - g2p * pb(g1m, gp))
        - 0.25 * (pb(g2m, g1p) - pb(g1m, g2p))
    )
    return [pf.Const(1.0), psi1, psi2]


class _CornerSeries:
    """Per-y cache of p-grid Fourier data for the semiclassical factor
    machinery of one smooth symbol."""

    def __init__(self, sym: SmoothSymbol, n_p: int = 256):
        self.sym = sym
        self.n_p = n_p
        self.p_grid = 2.0 * np.pi * np.arange(n_p) / n_p
        self._cache = {}

    def eval_expr(self, expr, y: float) -> np.ndarray:
        leaf = pf.make_leaf_eval(self.sym, y, self.p_grid)
        return np.asarray(expr.ev(leaf, pf.fourier_project), dtype=np.complex128)

    def grid_values(self, expr, y: float, key=None) -> np.ndarray:
        k = (key, round(float(y), 12))
        if key is None or k not in self._cache:
            vals = self.eval_expr(expr, y)
            if key is None:
                return vals
            self._cache[k] = vals
        return self._cache[k]


def psi_expansion(s: SmoothSymbol, side: str, order: int,
                  n_p: int = 256) -> tuple[SmoothSymbol, SmoothSymbol]:
    """Semiclassical Wiener-Hopf factors (minus, plus) of a smooth symbol.

    factor_pm = e^{(log f)^pm} (1 + sum_{1<=j<=order} (psi_j)^pm nu^j/j!)
    with the explicit psi_1, psi_2; the star-reconstruction error is
    O(nu^{order+1}).  The Fourier projections are evaluated on an n_p
    grid and interpolated trigonometrically.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    psis = _psi_exprs(side)
    series = _CornerSeries(s, n_p)
    nu = s.nu

    def factor_fn(sign):
        kind = PLUS if sign > 0 else MINUS
        gproj = Proj(Leaf(0, 0), kind)

        def fn(y, p):
            y = float(y)
            gv = series.grid_values(gproj, y, key=("gproj", sign))
            total = np.ones(series.n_p, dtype=np.complex128)
            for j in range(1, order + 1):
                pj = series.grid_values(Proj(psis[j], kind), y, key=("psi", j, sign))
                total = total + pj * nu ** j / math.factorial(j)
            vals = np.exp(gv) * total
            out = pf.fourier_interp(vals, p)
            return out if np.ndim(p) else complex(out)

        return fn

    minus = SmoothSymbol(factor_fn(-1), nu)
    plus = SmoothSymbol(factor_fn(+1), nu)
    return minus, plus


def psi_recursion_oracle(s: SmoothSymbol, side: str, m: int, y: float,
                         n_p: int = 256) -> np.ndarray:
    """psi_m evaluated from the defining recursion (orders <= 2); test
    oracle for the explicit expressions.

    Two-argument expressions stay separable, so each application of the
    coupling operator maps a sum of A(phi) B(phi') products to another
    such sum; projections act per slot and the slots merge only at the
    final coincidence limit.
    """
    if m > 2:
        raise ValueError("recursion oracle implemented for m <= 2")
    sig = _sigma(side)
    v1m, v1p = Proj(Leaf(1, 0), MINUS), Proj(Leaf(1, 0), PLUS)
    v2m, v2p = Proj(Leaf(0, 1), MINUS), Proj(Leaf(0, 1), PLUS)

    def op_det(terms):
        out = []
        for c, A, B in terms:
            out.append((c, A.d(1) + v2m * A, B.d(0) + v1p * B))
            out.append((-c, A.d(0) + v1m * A, B.d(1) + v2p * B))
        return out

    series = _CornerSeries(s, n_p)
    memo: dict[int, pf.Expr] = {}

    def psi_expr(mm: int) -> pf.Expr:
        # each level coincides the two slots into a single-argument
        # expression, which is what enters the next level
        if mm == 0:
            return pf.Const(1.0)
        if mm in memo:
            return memo[mm]
        pieces = []
        for j1 in range(mm):
            for j2 in range(mm):
                if j1 + j2 > mm:
                    continue
                power = mm - j1 - j2
                cf = math.factorial(mm) / (
                    math.factorial(j1) * math.factorial(j2) * math.factorial(power)
                )
                A = pf.Const(1.0) if j1 == 0 else Proj(psi_expr(j1), MINUS)
                B = pf.Const(1.0) if j2 == 0 else Proj(psi_expr(j2), PLUS)
                terms = [(cf * (0.5j * sig) ** power, A, B)]
                for _ in range(power):
                    terms = op_det(terms)
                for c, TA, TB in terms:
                    pieces.append(pf.Scale(c, pf.Prod([TA, TB])))
        memo[mm] = pf.Scale(-1.0, pf.Sum(pieces))
        return memo[mm]

    return series.eval_expr(psi_expr(m), y)


def log_factor_sum(s: SmoothSymbol, side: str, order: int,
                   n_p: int = 256) -> SmoothSymbol:
    """log f_+ + log f_- of the semiclassical factorization.

    order 0: g; order 1 adds (i/2) sigma nu {g^-, g^+}; order 2 adds the
    eight-term nu^2/8 Poisson-bracket expression.  Exponentiating and
    star-multiplying the implied factors reproduces the symbol with an
    O(nu^{order+1}) error.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    sig = _sigma(side)
    gm, gp = pf.gminus(), pf.gplus()
    B = pb(gm, gp)
    expr = Leaf(0, 0)
    if order >= 1:
        expr = expr + (0.5j * sig * s.nu) * B
    if order >= 2:
        Bm, Bp = Proj(B, MINUS), Proj(B, PLUS)
        g1m, g1p = Proj(Leaf(1, 0), MINUS), Proj(Leaf(1, 0), PLUS)
        g2m, g2p = Proj(Leaf(0, 1), MINUS), Proj(Leaf(0, 1), PLUS)
        eight = (
            2.0 * pb(gp, Bm) - 2.0 * pb(gm, Bp)
            - g2m * pb(gm, g1p) + g1m * pb(gm, g2p)
            - g1p * pb(g2m, gp) + g2p * pb(g1m, gp)
            - pb(g2m, g1p) + pb(g1m, g2p)
        )
        expr = expr + (s.nu ** 2 / 8.0) * eight
    series = _CornerSeries(s, n_p)

    def fn(y, p):
        vals = series.grid_values(expr, float(y), key=("lfs", side, order))
        out = pf.fourier_interp(vals, p)
        return out if np.ndim(p) else complex(out)

    return SmoothSymbol(fn, s.nu)
