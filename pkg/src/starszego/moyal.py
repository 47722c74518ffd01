"""The star algebra: exact banded Moyal product, star inverse/log/exp via
finite-section functional calculus, Moyal brackets, the BCH correction
functional, and the semiclassical (Groenewold) truncations.

The exact product uses the Laurent-series form

    ((a*b)_x)_m = sum_n (a_{x+(m-n)/2})_n (b_{x-n/2})_{m-n} ,

which matches operator composition: L(a*b) = L(a) L(b).  Star functions
are evaluated on finite sections of L(a) and read back along the
antidiagonals; exponential locality of the operators makes the boundary
contamination decay like decay_rho^margin, so a margin proportional to
log(tol)/log(rho) is discarded at each end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BranchCutError, InversionError, PoleProximityError, RangeError, StarSzegoError
from .symbol import (
    SmoothSymbol,
    SymbolGrid,
    fit_decay,
    grid_binop,
    grid_scale,
    unit_symbol,
)

DEFAULT_TRIM = 1e-15


@dataclass(frozen=True)
class WindowSpec:
    """Finite-section window control: ``margin`` grid sites (in x units)
    are discarded at each end after operator-level computations, and
    ``tol`` drives conditioning/branch guards."""

    margin: int = 12
    tol: float = 1e-12

    def __post_init__(self):
        if self.margin < 1:
            raise ValueError("margin must be >= 1")

    @classmethod
    def for_decay(cls, rho: float, tol: float = 1e-12) -> "WindowSpec":
        rho = min(max(rho, 1e-12), 0.97)
        w = int(math.ceil(math.log(tol) / math.log(rho)))
        return cls(margin=min(max(w, 4), 90), tol=tol)


@dataclass(frozen=True)
class BchOrder:
    """Truncation order of the BCH correction series; only the printed
    low orders are implemented."""

    order: int = 2

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError("BCH truncation order must be 0, 1 or 2")


# ---------------------------------------------------------------------------
# exact banded product


def star_product(a: SymbolGrid, b: SymbolGrid, trim_tol: float = DEFAULT_TRIM) -> SymbolGrid:
    """Exact Moyal product of two banded grids.

    The output window shrinks by the coupling reach (band/2 of the other
    factor) at each end, and the doubled band is trimmed back to the
    requested tolerance.
    """
    Ka, Kb = a.band, b.band
    lo = max(a.tx_min + Kb, b.tx_min + Ka)
    hi = min(a.tx_max - Kb, b.tx_max - Ka)
    if lo > hi:
        raise RangeError("grids too short for the coupling reach of the product")
    Kc = Ka + Kb
    ts = np.arange(lo, hi + 1)
    out = np.zeros((ts.size, 2 * Kc + 1), dtype=np.complex128)
    A, B = a.coeffs, b.coeffs
    for m in range(-Kc, Kc + 1):
        for n in range(max(-Ka, m - Kb), min(Ka, m + Kb) + 1):
            out[:, m + Kc] += (
                A[ts + (m - n) - a.tx_min, n + Ka] * B[ts - n - b.tx_min, (m - n) + Kb]
            )
    res = SymbolGrid(lo, out, fit_decay(out, Kc))
    return res.band_trimmed(trim_tol)


def moyal_bracket(a: SymbolGrid, b: SymbolGrid, trim_tol: float = DEFAULT_TRIM) -> SymbolGrid:
    """Moyal bracket -i(a*b - b*a)."""
    ab = star_product(a, b, trim_tol)
    ba = star_product(b, a, trim_tol)
    return grid_scale(grid_binop(ab, ba, 1.0, -1.0), -1.0j)


def phi_bch(c: SymbolGrid, d: SymbolGrid, order: BchOrder = BchOrder(2)) -> SymbolGrid:
    """Truncated BCH correction functional.

    Low orders of the expansion:  d  +  (i/3){c,d}_M  +  (1/12){{c,d}_M,d}_M.
    """
    out = d
    if order.order >= 1:
        br = moyal_bracket(c, d)
        out = grid_binop(out, br, 1.0, 1.0j / 3.0)
        if order.order >= 2:
            br2 = moyal_bracket(br, d)
            out = grid_binop(out, br2, 1.0, 1.0 / 12.0)
    return out


def s_phi_margin(c: SymbolGrid, d: SymbolGrid) -> tuple[float, bool]:
    """Value of the sufficient-condition bound (M(c)+M(d))(1+rho)/(1-rho)
    minimised over the annulus parameter, and whether it clears log 2.

    This is only a sufficient condition; failures are flagged, not fatal.
    """

    def annulus_sup(g: SymbolGrid, rho: float) -> float:
        K = g.band
        mags = np.array([np.abs(g.col(k)).max() for k in range(-K, K + 1)])
        ks = np.abs(np.arange(-K, K + 1))
        return float(np.sum(mags * rho ** (-ks.astype(float))))

    best = np.inf
    for rho in np.linspace(0.05, 0.9, 18):
        val = (annulus_sup(c, rho) + annulus_sup(d, rho)) * (1 + rho) / (1 - rho)
        best = min(best, val)
    return best, bool(best < math.log(2.0))


# ---------------------------------------------------------------------------
# finite sections and read-back


def laurent_section(a: SymbolGrid, j0: int, j1: int) -> np.ndarray:
    """Dense section L_{jk}(a) = (a_{(j+k)/2})_{j-k} for j, k in [j0, j1].

    The grid of ``a`` must cover x in [j0, j1]; entries beyond the band
    are zero.
    """
    if a.tx_min > 2 * j0 or a.tx_max < 2 * j1:
        raise RangeError(
            f"grid [{a.x_min}, {a.x_max}] does not cover the section [{j0}, {j1}]"
        )
    n = j1 - j0 + 1
    jj = np.arange(j0, j1 + 1)
    tx = jj[:, None] + jj[None, :]
    dd = jj[:, None] - jj[None, :]
    K = a.band
    M = np.zeros((n, n), dtype=np.complex128)
    mask = np.abs(dd) <= K
    M[mask] = a.coeffs[tx[mask] - a.tx_min, dd[mask] + K]
    return M


def read_symbol_from_matrix(M: np.ndarray, j0: int, margin: int,
                            band_cap: int | None = None,
                            trim_tol: float = DEFAULT_TRIM) -> SymbolGrid:
    """Read a symbol back from a matrix section via
    (b_{(j+k)/2})_{j-k} = M_{jk}, discarding ``margin`` x-sites per end.

    Only entries on the relevant sublattice (2x + k even) are determined
    by the matrix; the complementary parity is filled by averaging the
    two x-neighbours so the grid stays smooth.
    """
    n = M.shape[0]
    j1 = j0 + n - 1
    tx_lo, tx_hi = 2 * (j0 + margin), 2 * (j1 - margin)
    if tx_lo > tx_hi:
        raise RangeError("margin leaves an empty read-back window")
    K = n - 1 if band_cap is None else min(band_cap, n - 1)
    nt = tx_hi - tx_lo + 1
    coeffs = np.zeros((nt, 2 * K + 1), dtype=np.complex128)
    ts = np.arange(tx_lo, tx_hi + 1)
    for d in range(-K, K + 1):
        sel = (ts + d) % 2 == 0
        j = (ts[sel] + d) // 2 - j0
        k = (ts[sel] - d) // 2 - j0
        ok = (j >= 0) & (j < n) & (k >= 0) & (k < n)
        rows = np.where(sel)[0][ok]
        coeffs[rows, d + K] = M[j[ok], k[ok]]
    # fill the complementary parity by x-interpolation
    for d in range(-K, K + 1):
        odd = (ts + d) % 2 != 0
        idx = np.where(odd)[0]
        for i in idx:
            lo = coeffs[i - 1, d + K] if i - 1 >= 0 else None
            hi = coeffs[i + 1, d + K] if i + 1 < nt else None
            if lo is None:
                coeffs[i, d + K] = hi
            elif hi is None:
                coeffs[i, d + K] = lo
            else:
                coeffs[i, d + K] = 0.5 * (lo + hi)
    g = SymbolGrid(tx_lo, coeffs, fit_decay(coeffs, K))
    return g.band_trimmed(trim_tol)


def section_bounds(a: SymbolGrid) -> tuple[int, int]:
    """Largest integer index window [j0, j1] covered by the grid."""
    j0 = math.ceil(a.x_min)
    j1 = math.floor(a.x_max)
    if j0 > j1:
        raise RangeError("grid too short for any integer section")
    return j0, j1


def _rcond(lu, M: np.ndarray) -> float:
    anorm = np.linalg.norm(M, 1)
    try:
        gecon = scipy.linalg.get_lapack_funcs(("gecon",), (M,))[0]
        rc, info = gecon(lu[0], anorm, norm="1")
        if info == 0:
            return float(rc)
    except Exception:
        pass
    return 1.0 / float(np.linalg.cond(M, 1))


# ---------------------------------------------------------------------------
# star functions via finite sections


def star_inverse(a: SymbolGrid, win: WindowSpec) -> SymbolGrid:
    """Star inverse by dense LU inversion of the truncated L(a).

    Rejects sections with reciprocal condition estimate below win.tol
    (default class threshold 1e-12).  The residual ||a * b - 1||_inf on
    the common interior window is attached to the result diagnostics.
    """
    j0, j1 = section_bounds(a)
    M = laurent_section(a, j0, j1)
    lu = scipy.linalg.lu_factor(M)
    if np.abs(np.diag(lu[0])).min() == 0.0:
        raise InversionError("singular section: exact zero pivot")
    rc = _rcond(lu, M)
    if rc < min(win.tol, 1e-12):
        raise InversionError(f"section too ill-conditioned: rcond={rc:.2e}")
    inv = scipy.linalg.lu_solve(lu, np.eye(M.shape[0], dtype=np.complex128))
    b = read_symbol_from_matrix(inv, j0, win.margin)
    residual = np.nan
    try:
        prod = star_product(a, b)
        one = unit_symbol(prod.x_min, prod.x_max)
        residual = grid_binop(prod, one, 1.0, -1.0).max_abs(relevant_only=True)
    except RangeError:
        pass
    return b.with_diagnostics(residual=residual, rcond=rc, margin=win.margin)


def _branch_distance(eigs: np.ndarray) -> float:
    dist = np.where(eigs.real <= 0.0, np.abs(eigs.imag), np.abs(eigs))
    return float(dist.min())


def star_log(a: SymbolGrid, win: WindowSpec) -> SymbolGrid:
    """Star logarithm (principal branch) via the matrix logarithm of the
    truncated L(a).

    Sections whose spectrum approaches the closed negative real axis are
    rejected: that is the runtime signal of a possibly nonzero star
    winding number.
    """
    j0, j1 = section_bounds(a)
    M = laurent_section(a, j0, j1)
    eigs = np.linalg.eigvals(M)
    scale = float(np.abs(eigs).max())
    dist = _branch_distance(eigs)
    if scale == 0.0 or dist < win.tol * scale:
        raise BranchCutError(
            f"section spectrum within {dist:.2e} of the log branch cut "
            "(nonzero star winding number suspected)"
        )
    L = scipy.linalg.logm(M)
    if not np.all(np.isfinite(L)):
        raise BranchCutError("matrix logarithm did not converge")
    b = read_symbol_from_matrix(L, j0, win.margin)
    return b.with_diagnostics(branch_distance=dist / scale, margin=win.margin)


def star_exp(a: SymbolGrid, win: WindowSpec) -> SymbolGrid:
    """Star exponential via scaling-and-squaring on the truncated L(a)."""
    j0, j1 = section_bounds(a)
    M = laurent_section(a, j0, j1)
    E = scipy.linalg.expm(M)
    if not np.all(np.isfinite(E)):
        raise StarSzegoError("star_exp overflow: section norm beyond exponent range")
    b = read_symbol_from_matrix(E, j0, win.margin)
    return b.with_diagnostics(margin=win.margin)


# ---------------------------------------------------------------------------
# semiclassical (Groenewold) truncations


def semiclassical_product(f: SmoothSymbol, g: SmoothSymbol, k: int) -> SmoothSymbol:
    """Truncated Groenewold series for the star product of two smooth
    symbols with the same inhomogeneity scale.

    Keeps the j < k terms of
    sum_j (1/j!) (i nu (d_p1 d_y2 - d_y1 d_p2)/2)^j f g at coincident
    arguments; the truncation error is O(nu^k).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if abs(f.nu - g.nu) > 1e-15 * max(f.nu, g.nu):
        raise ValueError("factors must share the same nu")
    nu = f.nu
    terms = []
    for j in range(k):
        for r in range(j + 1):
            cf = (1j * nu / 2.0) ** j / math.factorial(j) * math.comb(j, r) * (-1.0) ** (j - r)
            terms.append((cf, f.deriv(j - r, r), g.deriv(r, j - r)))

    def value(y, p):
        acc = 0.0
        for cf, df, dg in terms:
            acc = acc + cf * df(y, p) * dg(y, p)
        return acc

    return SmoothSymbol(value, nu)


def semiclassical_log(s: SmoothSymbol) -> SmoothSymbol:
    """Fourth-order accurate log symbol of a smooth symbol.

    In slow coordinates the correction to g = log f enters at nu^2:
    l = g - nu^2 (2 g1 g2 g12 + 3 g12^2 - g2^2 g11 - g1^2 g22
    - 3 g11 g22)/24, with the error O(nu^4).
    """
    nu2 = s.nu ** 2
    g = s.log_deriv(0, 0)
    g1, g2 = s.log_deriv(1, 0), s.log_deriv(0, 1)
    g11, g22, g12 = s.log_deriv(2, 0), s.log_deriv(0, 2), s.log_deriv(1, 1)

    def value(y, p):
        a1, a2, a12 = g1(y, p), g2(y, p), g12(y, p)
        a11, a22 = g11(y, p), g22(y, p)
        corr = 2 * a1 * a2 * a12 + 3 * a12 ** 2 - a2 ** 2 * a11 - a1 ** 2 * a22 - 3 * a11 * a22
        return g(y, p) - nu2 * corr / 24.0

    return SmoothSymbol(value, s.nu)


def semiclassical_inverse(s: SmoothSymbol, zeta: complex, k: int,
                          pole_tol: float = 1e-8) -> SmoothSymbol:
    """Truncated resolvent symbol of (zeta - a)^{-1_star}.

    k = 0 is the frozen-x resolvent 1/(zeta - f); k = 1 adds the two
    second-order corrections (third- and fourth-power poles).  The error
    is O(nu^{2k+2}).
    """
    if k not in (0, 1):
        raise ValueError("only k in {0, 1} is implemented")
    nu2 = s.nu ** 2
    f = s.deriv(0, 0)
    if k == 1:
        f1, f2 = s.deriv(1, 0), s.deriv(0, 1)
        f11, f22, f12 = s.deriv(2, 0), s.deriv(0, 2), s.deriv(1, 1)

    def value(y, p):
        den = zeta - f(y, p)
        if np.min(np.abs(den)) < pole_tol * (1.0 + abs(zeta)):
            raise PoleProximityError(f"zeta={zeta} too close to the symbol range")
        out = 1.0 / den
        if k == 1:
            b1, b2, b12 = f1(y, p), f2(y, p), f12(y, p)
            b11, b22 = f11(y, p), f22(y, p)
            out = out + nu2 * 0.25 * (b12 ** 2 - b11 * b22) / den ** 3
            out = out - nu2 * 0.25 * (b22 * b1 ** 2 + b11 * b2 ** 2 - 2 * b1 * b2 * b12) / den ** 4
        return out

    return SmoothSymbol(value, s.nu)
