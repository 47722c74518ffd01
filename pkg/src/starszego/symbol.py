"""Symbols on half-integer grids with banded Fourier coefficients.

A symbol assigns to every half-integer x a function a_x on the unit circle.
``SymbolGrid`` stores the Fourier coefficients (a_x)_k for |k| <= K on a
contiguous x-window.  Grid positions are held in doubled coordinates
tx = 2x, so every index computation is integer arithmetic.

Only the entries with 2x + k even ever enter a matrix section built from
the symbol (the antidiagonal x = (j+k)/2 and the offset k = j-k always
have matching parity).  Sampled symbols fill both parities smoothly;
symbols read back from matrices fill the complementary parity by
interpolation.  Norms used in residual checks therefore default to the
relevant sublattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from .errors import RangeError

#: relative size below which the edge band of a grid counts as resolved
BAND_TAIL_TOL = 1e-8


def as_tx(x) -> int:
    """Convert a half-integer coordinate to its doubled integer form."""
    tx = round(2.0 * float(x))
    if abs(2.0 * float(x) - tx) > 1e-9:
        raise RangeError(f"{x!r} is not a half-integer")
    return int(tx)


def fit_decay(coeffs: np.ndarray, band: int) -> float:
    """Least-squares exponential decay rate of banded coefficients.

    Fits log max_x |(a_x)_k| against |k| using only |k| >= K/2 to avoid
    pre-asymptotic bias; falls back to the full band when that leaves
    fewer than two usable points.
    """
    if band == 0:
        return 1e-16
    mags = np.empty(band + 1)
    for k in range(band + 1):
        mags[k] = max(
            np.max(np.abs(coeffs[:, band + k])),
            np.max(np.abs(coeffs[:, band - k])),
        )
    scale = mags.max()
    if scale == 0.0:
        return 1e-16
    lo = max(1, band // 2)
    ks, vals = [], []
    for k in range(lo, band + 1):
        if mags[k] > scale * 1e-290:
            ks.append(k)
            vals.append(math.log(mags[k] / scale))
    if len(ks) < 2:
        ks, vals = [], []
        for k in range(0, band + 1):
            if mags[k] > scale * 1e-290:
                ks.append(k)
                vals.append(math.log(mags[k] / scale))
    if len(ks) < 2:
        return 1e-16
    slope = np.polyfit(np.asarray(ks, dtype=float), np.asarray(vals), 1)[0]
    return float(np.exp(min(slope, 0.0)))


@dataclass(frozen=True)
class SymbolGrid:
    """Banded Fourier data (a_x)_k of a symbol on a half-integer window.

    tx_min is 2*x_min; ``coeffs[i, band + k]`` holds (a_x)_k for
    x = (tx_min + i)/2.
    """

    tx_min: int
    coeffs: np.ndarray
    decay_rho: float
    warnings: tuple = ()
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 2 or c.shape[1] % 2 != 1:
            raise ValueError("coeffs must be (n_x, 2K+1)")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- geometry -----------------------------------------------------
    @property
    def band(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def n_x(self) -> int:
        return self.coeffs.shape[0]

    @property
    def tx_max(self) -> int:
        return self.tx_min + self.n_x - 1

    @property
    def x_min(self) -> float:
        return self.tx_min / 2.0

    @property
    def x_max(self) -> float:
        return self.tx_max / 2.0

    def x_values(self) -> np.ndarray:
        return (self.tx_min + np.arange(self.n_x)) / 2.0

    def covers(self, x_lo, x_hi) -> bool:
        return self.tx_min <= as_tx(x_lo) and as_tx(x_hi) <= self.tx_max

    # -- access -------------------------------------------------------
    def coeff(self, x, k: int) -> complex:
        """Single coefficient (a_x)_k; zero outside the band, error outside
        the grid."""
        tx = as_tx(x)
        if not self.tx_min <= tx <= self.tx_max:
            raise RangeError(f"x={x} outside grid [{self.x_min}, {self.x_max}]")
        if abs(k) > self.band:
            return 0.0 + 0.0j
        return complex(self.coeffs[tx - self.tx_min, self.band + k])

    def col(self, k: int) -> np.ndarray:
        """All grid values of (a_.)_k (zeros when |k| > K)."""
        if abs(k) > self.band:
            return np.zeros(self.n_x, dtype=np.complex128)
        return self.coeffs[:, self.band + k]

    def relevant_mask(self) -> np.ndarray:
        """Boolean mask of the entries with 2x + k even."""
        tx = self.tx_min + np.arange(self.n_x)
        k = np.arange(-self.band, self.band + 1)
        return ((tx[:, None] + k[None, :]) % 2) == 0

    def max_abs(self, relevant_only: bool = True) -> float:
        a = np.abs(self.coeffs)
        if relevant_only:
            a = np.where(self.relevant_mask(), a, 0.0)
        return float(a.max()) if a.size else 0.0

    # -- derived grids ------------------------------------------------
    def restrict(self, x_lo, x_hi) -> "SymbolGrid":
        """Sub-grid on [x_lo, x_hi]."""
        lo, hi = as_tx(x_lo), as_tx(x_hi)
        if lo < self.tx_min or hi > self.tx_max or lo > hi:
            raise RangeError(
                f"window [{x_lo}, {x_hi}] not inside [{self.x_min}, {self.x_max}]"
            )
        return SymbolGrid(
            lo,
            self.coeffs[lo - self.tx_min : hi - self.tx_min + 1],
            self.decay_rho,
            self.warnings,
        )

    def band_trimmed(self, tol: float = 1e-15) -> "SymbolGrid":
        """Drop outer bands whose magnitude stays below tol * max|coeff|."""
        scale = float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0
        if scale == 0.0:
            return SymbolGrid(self.tx_min, self.coeffs[:, self.band : self.band + 1],
                              self.decay_rho, self.warnings)
        K = self.band
        keep = K
        while keep > 0:
            hi = np.abs(self.coeffs[:, K + keep]).max()
            lo = np.abs(self.coeffs[:, K - keep]).max()
            if max(hi, lo) > tol * scale:
                break
            keep -= 1
        if keep == K:
            return self
        sl = self.coeffs[:, K - keep : K + keep + 1]
        return SymbolGrid(self.tx_min, sl, fit_decay(sl, keep), self.warnings)

    def with_band(self, band: int) -> "SymbolGrid":
        """Pad (with zeros) or truncate to the requested band."""
        K = self.band
        if band == K:
            return self
        out = np.zeros((self.n_x, 2 * band + 1), dtype=np.complex128)
        m = min(band, K)
        out[:, band - m : band + m + 1] = self.coeffs[:, K - m : K + m + 1]
        return SymbolGrid(self.tx_min, out, self.decay_rho, self.warnings)

    def with_diagnostics(self, **info) -> "SymbolGrid":
        d = dict(self.diagnostics)
        d.update(info)
        g = SymbolGrid(self.tx_min, self.coeffs, self.decay_rho, self.warnings)
        g.diagnostics.update(d)
        return g


class ProjectionKind(Enum):
    """Fourier half-line projections: Plus keeps k >= 0, Minus keeps
    k <= -1, Tilde is Plus - Minus."""

    PLUS = "plus"
    MINUS = "minus"
    TILDE = "tilde"


# ---------------------------------------------------------------------------
# sampling


def _sample_circle(f, x: float, n_p: int) -> np.ndarray:
    p = 2.0 * np.pi * np.arange(n_p) / n_p
    try:
        vals = np.asarray(f(x, p), dtype=np.complex128)
        if vals.shape != p.shape:
            raise TypeError
    except Exception:
        vals = np.array([f(x, pj) for pj in p], dtype=np.complex128)
    return vals


def sample_symbol(f, x_min, x_max, band: int, n_p: int) -> SymbolGrid:
    """Sample a representative f(x, p) into a banded grid.

    The Fourier coefficients are trapezoid-rule (DFT) integrals, which are
    spectrally accurate for analytic 2*pi-periodic integrands; n_p must be
    at least 4K + 4 so that the retained band is alias-free.
    """
    if n_p < 4 * band + 4:
        raise ValueError(f"n_p={n_p} < 4K+4={4 * band + 4}")
    lo, hi = as_tx(x_min), as_tx(x_max)
    if lo > hi:
        raise RangeError("x_min must not exceed x_max")
    n_x = hi - lo + 1
    coeffs = np.zeros((n_x, 2 * band + 1), dtype=np.complex128)
    for i in range(n_x):
        vals = _sample_circle(f, (lo + i) / 2.0, n_p)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"evaluator returned non-finite values at x={(lo + i) / 2.0}")
        hat = np.fft.fft(vals) / n_p
        coeffs[i, band] = hat[0]
        for k in range(1, band + 1):
            coeffs[i, band + k] = hat[k]
            coeffs[i, band - k] = hat[n_p - k]
    rho = fit_decay(coeffs, band)
    warns = []
    if rho >= 1.0:
        warns.append("symbol not exponentially banded")
    scale = float(np.abs(coeffs).max())
    if band > 0 and scale > 0:
        edge = max(np.abs(coeffs[:, 0]).max(), np.abs(coeffs[:, -1]).max())
        if edge > BAND_TAIL_TOL * scale:
            warns.append("band tail above tolerance")
    return SymbolGrid(lo, coeffs, rho, tuple(warns))


def unit_symbol(x_min, x_max) -> SymbolGrid:
    """The identity symbol 1 on a window."""
    lo, hi = as_tx(x_min), as_tx(x_max)
    coeffs = np.ones((hi - lo + 1, 1), dtype=np.complex128)
    return SymbolGrid(lo, coeffs, 1e-16)


def z_power(n: int, x_min, x_max) -> SymbolGrid:
    """The shift symbol z^n on a window."""
    lo, hi = as_tx(x_min), as_tx(x_max)
    band = abs(n)
    coeffs = np.zeros((hi - lo + 1, 2 * band + 1), dtype=np.complex128)
    coeffs[:, band + n] = 1.0
    return SymbolGrid(lo, coeffs, 1e-16)


# ---------------------------------------------------------------------------
# elementary transforms


def project(a: SymbolGrid, kind: ProjectionKind) -> SymbolGrid:
    """Fourier half-line projection of a symbol (k=0 belongs to Plus)."""
    K = a.band
    out = a.coeffs.copy()
    if kind is ProjectionKind.PLUS:
        out[:, :K] = 0.0
    elif kind is ProjectionKind.MINUS:
        out[:, K:] = 0.0
    else:
        out[:, :K] *= -1.0
    return SymbolGrid(a.tx_min, out, a.decay_rho, a.warnings)


def reflect(a: SymbolGrid, n: int = 0) -> SymbolGrid:
    """Reflected symbol: (out_x)_k = (a_{n+1-x})_{-k}.

    Involution for fixed n; requires the grid of ``a`` to cover the
    reflected window.
    """
    # x in [x_lo, x_hi] maps to n+1-x in [n+1-x_hi, n+1-x_lo]
    tx_lo = 2 * (n + 1) - a.tx_max
    out = a.coeffs[::-1, ::-1].copy()
    return SymbolGrid(tx_lo, out, a.decay_rho, a.warnings)


def shift(a: SymbolGrid, t) -> SymbolGrid:
    """Translated symbol (out)_x = a_{x+t} for half-integer t."""
    dt = as_tx(t)
    return SymbolGrid(a.tx_min - dt, a.coeffs, a.decay_rho, a.warnings)


def grid_binop(a: SymbolGrid, b: SymbolGrid, fa=1.0, fb=1.0) -> SymbolGrid:
    """fa*a + fb*b on the intersection window, band = max of the two."""
    lo = max(a.tx_min, b.tx_min)
    hi = min(a.tx_max, b.tx_max)
    if lo > hi:
        raise RangeError("grids do not overlap")
    K = max(a.band, b.band)
    out = np.zeros((hi - lo + 1, 2 * K + 1), dtype=np.complex128)
    for g, f in ((a, fa), (b, fb)):
        sl = g.coeffs[lo - g.tx_min : hi - g.tx_min + 1]
        out[:, K - g.band : K + g.band + 1] += f * sl
    return SymbolGrid(lo, out, max(a.decay_rho, b.decay_rho))


def grid_scale(a: SymbolGrid, c) -> SymbolGrid:
    return SymbolGrid(a.tx_min, c * a.coeffs, a.decay_rho, a.warnings)


def max_abs_diff(a: SymbolGrid, b: SymbolGrid, relevant_only: bool = True,
                 x_lo=None, x_hi=None) -> float:
    """Max |a - b| over the (relevant sublattice of the) common window."""
    d = grid_binop(a, b, 1.0, -1.0)
    if x_lo is not None or x_hi is not None:
        d = d.restrict(a.x_min if x_lo is None else x_lo,
                       a.x_max if x_hi is None else x_hi)
    return d.max_abs(relevant_only=relevant_only)


def band_tail_ratio(a: SymbolGrid) -> float:
    """max_x |(a_x)_{+-K}| relative to the largest coefficient."""
    scale = float(np.abs(a.coeffs).max())
    if scale == 0.0 or a.band == 0:
        return 0.0
    edge = max(np.abs(a.col(a.band)).max(), np.abs(a.col(-a.band)).max())
    return float(edge / scale)


def parseval_mismatch(a: SymbolGrid, f, n_p: int = 512) -> float:
    """Relative gap between sum_k |(a_x)_k|^2 and the L2 norm of f(x, .)."""
    worst = 0.0
    for i, x in enumerate(a.x_values()):
        vals = _sample_circle(f, x, n_p)
        lhs = float(np.sum(np.abs(a.coeffs[i]) ** 2))
        rhs = float(np.mean(np.abs(vals) ** 2))
        if rhs > 0:
            worst = max(worst, abs(lhs - rhs) / rhs)
    return worst


# ---------------------------------------------------------------------------
# smooth (semiclassical) symbols


def _fornberg_weights(order: int, stencil: np.ndarray) -> np.ndarray:
    """Finite-difference weights for the given derivative order on a
    stencil, for evaluation at 0 (Fornberg's recursion)."""
    n = len(stencil)
    w = np.zeros((order + 1, n))
    w[0, 0] = 1.0
    c1 = 1.0
    c4 = stencil[0]
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = stencil[i]
        for j in range(i):
            c3 = stencil[i] - stencil[j]
            c2 *= c3
            if j == i - 1:
                for m in range(mn, 0, -1):
                    w[m, i] = c1 * (m * w[m - 1, i - 1] - c5 * w[m, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for m in range(mn, 0, -1):
                w[m, j] = (c4 * w[m, j] - m * w[m - 1, j]) / c3
            w[0, j] = c4 * w[0, j] / c3
        c1 = c2
    return w[order]


def _fd_step(order: int) -> float:
    return 10.0 ** (-14.0 / (order + 4))


def fd_mixed_deriv(fn, m1: int, m2: int):
    """Central finite-difference evaluator for d^m1_x d^m2_p fn(x, p)."""
    if m1 == 0 and m2 == 0:
        return fn
    r1 = max(m1 // 2 + 2, 2) if m1 else 0
    r2 = max(m2 // 2 + 2, 2) if m2 else 0
    s1 = np.arange(-r1, r1 + 1, dtype=float) if m1 else np.array([0.0])
    s2 = np.arange(-r2, r2 + 1, dtype=float) if m2 else np.array([0.0])
    h1 = _fd_step(m1) if m1 else 1.0
    h2 = _fd_step(m2) if m2 else 1.0
    w1 = _fornberg_weights(m1, s1) / h1 ** m1 if m1 else np.array([1.0])
    w2 = _fornberg_weights(m2, s2) / h2 ** m2 if m2 else np.array([1.0])

    def deriv(x, p):
        acc = 0.0 + 0.0j
        for i, si in enumerate(s1):
            for j, sj in enumerate(s2):
                acc = acc + w1[i] * w2[j] * fn(x + si * h1, p + sj * h2)
        return acc

    return deriv


class SmoothSymbol:
    """Analytic symbol with an inhomogeneity scale.

    ``fn(y, p)`` gives the symbol values in the slow variable y; the
    represented symbol is [(x, p) -> fn(x*nu, p)].  Mixed partial
    derivatives (with respect to the slow variable) come from exact
    evaluators when supplied and central finite differences otherwise.
    A log-form evaluator g with fn = exp(g) is kept when the symbol was
    built from an exponent, as the asymptotic formulas consume g.
    """

    def __init__(self, fn, nu: float, derivs: Mapping | None = None,
                 log_fn=None, log_derivs: Mapping | None = None):
        if nu <= 0:
            raise ValueError("nu must be positive")
        self.fn = fn
        self.nu = float(nu)
        self._derivs = dict(derivs or {})
        self.log_fn = log_fn
        self._log_derivs = dict(log_derivs or {})

    @classmethod
    def from_exponent(cls, g, nu: float, g_derivs: Mapping | None = None):
        """Symbol e^{g(x nu, p)} from the exponent and its derivatives."""
        sym = cls(lambda y, p: np.exp(g(y, p)), nu, log_fn=g,
                  log_derivs=g_derivs or {})
        return sym

    @property
    def has_log(self) -> bool:
        return self.log_fn is not None

    def value(self, y, p):
        return self.fn(y, p)

    def log_deriv(self, m1: int, m2: int):
        """Evaluator of d^m1_y d^m2_p log fn."""
        if (m1, m2) == (0, 0) and self.log_fn is not None:
            return self.log_fn
        key = (m1, m2)
        if key not in self._log_derivs:
            base = self.log_fn if self.log_fn is not None else (
                lambda y, p: np.log(self.fn(y, p)))
            self._log_derivs[key] = fd_mixed_deriv(base, m1, m2)
        return self._log_derivs[key]

    def deriv(self, m1: int, m2: int):
        """Evaluator of d^m1_y d^m2_p fn.

        When the symbol carries a log form, derivatives are assembled
        exactly from the exponent by the recursion
        d_i(e^g X) = e^g (d_i X + (d_i g) X).
        """
        key = (m1, m2)
        if key in self._derivs:
            return self._derivs[key]
        if key == (0, 0):
            self._derivs[key] = self.fn
            return self.fn
        if self.log_fn is not None:
            poly = _exp_deriv_poly(m1, m2)

            def ev(y, p, _poly=poly):
                acc = 0.0
                for coef, factors in _poly:
                    term = coef
                    for (a, b), pw in factors.items():
                        term = term * self.log_deriv(a, b)(y, p) ** pw
                    acc = acc + term
                return acc * np.exp(self.log_fn(y, p))

            self._derivs[key] = ev
        else:
            self._derivs[key] = fd_mixed_deriv(self.fn, m1, m2)
        return self._derivs[key]


def _exp_deriv_poly(m1: int, m2: int):
    """Polynomial P in the derivatives of g with d^m1_x d^m2_p e^g = e^g P.

    Terms are (coefficient, {(a, b): power}) with (a, b) the derivative
    multi-index of g.
    """
    # represent e^{-g} d^.. e^g as dict {frozen factor tuple: coef}
    terms = {(): 1.0}

    def differentiate(terms, slot):
        out = {}
        for factors, coef in terms.items():
            fdict = dict(factors)
            # product rule over existing factors
            for (a, b), pw in fdict.items():
                nf = dict(fdict)
                nf[(a, b)] = pw - 1
                if nf[(a, b)] == 0:
                    del nf[(a, b)]
                key = (a + 1, b) if slot == 0 else (a, b + 1)
                nf[key] = nf.get(key, 0) + 1
                fk = tuple(sorted(nf.items()))
                out[fk] = out.get(fk, 0.0) + coef * pw
            # the chain-rule factor from e^g itself
            nf = dict(fdict)
            key = (1, 0) if slot == 0 else (0, 1)
            nf[key] = nf.get(key, 0) + 1
            fk = tuple(sorted(nf.items()))
            out[fk] = out.get(fk, 0.0) + coef
        return out

    for _ in range(m1):
        terms = differentiate(terms, 0)
    for _ in range(m2):
        terms = differentiate(terms, 1)
    return [(coef, dict(factors)) for factors, coef in terms.items()]


def smooth_to_grid(s: SmoothSymbol, x_min, x_max, band: int, n_p: int) -> SymbolGrid:
    """Sample a smooth symbol at fn(x*nu, p) into a banded grid."""
    nu = s.nu
    return sample_symbol(lambda x, p: s.fn(x * nu, p), x_min, x_max, band, n_p)
