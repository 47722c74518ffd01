"""Finite matrix realizations and the exact determinant machinery.

Everything a prediction is checked against lives here: the star-Toeplitz
sections T_n(a), star-Hankel sections, block builders, a plain dense LU
log-determinant (deliberately unsophisticated, for trustworthiness), and
the exact BOCG identity

  det T_n(a) = det(I - H(z^{-n} * c) H(d~ * z^{-n})) / det(T(c) T(e))
               * exp( sum_j log((a+L_j)_0 (a-L_j)_0) ),

with c = a_-^L * (a_+^R)^{-1*} and e = (a_-^R)^{-1*} * a_+^L.  The
z^{-n} products are index shifts on the Hankel sections, and the
denominator is evaluated through its trace form
exp(tr T(b_+^L + b_-^L - b_-^R - b_+^R)) with b = log* of the factors,
an absolutely convergent diagonal sum.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import RangeError
from .moyal import WindowSpec, star_inverse, star_log, star_product
from .symbol import BAND_TAIL_TOL, SymbolGrid, band_tail_ratio, fit_decay, grid_binop, reflect
from .wiener_hopf import LEFT, RIGHT, FactorPair

MAGIC = b"STARSZG1"


@dataclass(frozen=True)
class DenseComplexMatrix:
    """Dense complex section with a provenance tag."""

    entries: np.ndarray
    provenance: str = "star-Toeplitz"

    def __post_init__(self):
        e = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("entries must be square")
        if not np.all(np.isfinite(e)):
            raise ValueError("entries must be finite")
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class LogDet:
    """log|det| plus principal phase, with the smallest pivot recorded.

    exp(log_abs + i phase) reproduces the determinant; log_abs = -inf
    signals an exactly singular section.
    """

    log_abs: float
    phase: float
    pivot_min: float

    @property
    def value(self) -> complex:
        return self.log_abs + 1j * self.phase


def logdet(m: DenseComplexMatrix | np.ndarray) -> LogDet:
    """Dense LU (partial pivoting) log-determinant."""
    A = m.entries if isinstance(m, DenseComplexMatrix) else np.asarray(m, dtype=np.complex128)
    if A.size == 0:
        return LogDet(0.0, 0.0, np.inf)
    import warnings

    with warnings.catch_warnings():
        # a zero pivot is a legitimate det = 0 sentinel here
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    diag = np.diag(lu)
    adiag = np.abs(diag)
    pivot_min = float(adiag.min())
    if pivot_min == 0.0:
        return LogDet(-np.inf, 0.0, 0.0)
    swaps = int(np.sum(piv != np.arange(A.shape[0])))
    log_abs = float(np.sum(np.log(adiag)))
    phase = float(np.sum(np.angle(diag))) + math.pi * (swaps % 2)
    phase = math.remainder(phase, 2.0 * math.pi)
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    return LogDet(log_abs, phase, pivot_min)


# ---------------------------------------------------------------------------
# sections


def build_Tn(a: SymbolGrid, n: int) -> DenseComplexMatrix:
    """n x n star-Toeplitz section (T_n)_{jk} = (a_{(j+k)/2})_{j-k}."""
    if n < 1:
        raise ValueError("n must be positive")
    if not a.covers(1, n):
        raise RangeError(f"grid [{a.x_min}, {a.x_max}] does not cover x in [1, {n}]")
    if a.band < n - 1 and "band tail above tolerance" in a.warnings:
        raise RangeError("band shortfall: sampled tail above tolerance")
    jj = np.arange(1, n + 1)
    tx = jj[:, None] + jj[None, :]
    dd = jj[:, None] - jj[None, :]
    K = a.band
    M = np.zeros((n, n), dtype=np.complex128)
    mask = np.abs(dd) <= K
    M[mask] = a.coeffs[tx[mask] - a.tx_min, dd[mask] + K]
    return DenseComplexMatrix(M, "star-Toeplitz")


def build_hankel(a: SymbolGrid, rows: int, cols: int,
                 row_shift: int = 0, col_shift: int = 0) -> DenseComplexMatrix:
    """Star-Hankel section H_{jk} = (a_{(j-k+1)/2})_{j+k-1}.

    The shifts realize z^{-n} star products as index shifts
    (H(z^{-n} * a) = rows shifted by n, H(a * z^{-n}) = columns).
    """
    jj = np.arange(1, rows + 1)[:, None] + row_shift
    kk = np.arange(1, cols + 1)[None, :] + col_shift
    tx = jj - kk + 1
    q = jj + kk - 1
    K = a.band
    M = np.zeros((rows, cols), dtype=np.complex128)
    mask = np.abs(q) <= K
    if np.any(mask & ((tx < a.tx_min) | (tx > a.tx_max))):
        raise RangeError("grid does not cover the requested Hankel section")
    M[mask] = a.coeffs[tx[mask] - a.tx_min, q[mask] + K]
    return _RectMatrix(M)


class _RectMatrix:
    """Minimal rectangular wrapper (Hankel products only)."""

    def __init__(self, entries: np.ndarray):
        self.entries = np.ascontiguousarray(entries, dtype=np.complex128)

    @property
    def n(self):
        return self.entries.shape[0]


# ---------------------------------------------------------------------------
# block sections


@dataclass(frozen=True)
class BlockSymbolGrid:
    """Banded Fourier data of a kappa x kappa matrix-valued symbol."""

    tx_min: int
    coeffs: np.ndarray  # (n_x, 2K+1, kappa, kappa)
    decay_rho: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 4 or c.shape[1] % 2 != 1 or c.shape[2] != c.shape[3]:
            raise ValueError("coeffs must be (n_x, 2K+1, kappa, kappa)")
        object.__setattr__(self, "coeffs", c)

    @property
    def band(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def kappa(self) -> int:
        return self.coeffs.shape[2]

    @property
    def tx_max(self) -> int:
        return self.tx_min + self.coeffs.shape[0] - 1


def sample_block_symbol(F, x_min, x_max, band: int, n_p: int) -> BlockSymbolGrid:
    """Sample a matrix-valued representative F(x, p) -> (kappa, kappa)."""
    from .symbol import as_tx

    lo, hi = as_tx(x_min), as_tx(x_max)
    p = 2.0 * np.pi * np.arange(n_p) / n_p
    probe = np.asarray(F((lo) / 2.0, p[0]), dtype=np.complex128)
    kappa = probe.shape[0]
    coeffs = np.zeros((hi - lo + 1, 2 * band + 1, kappa, kappa), dtype=np.complex128)
    for i in range(hi - lo + 1):
        x = (lo + i) / 2.0
        vals = np.stack([np.asarray(F(x, pj), dtype=np.complex128) for pj in p])
        hat = np.fft.fft(vals, axis=0) / n_p
        coeffs[i, band] = hat[0]
        for k in range(1, band + 1):
            coeffs[i, band + k] = hat[k]
            coeffs[i, band - k] = hat[n_p - k]
    flat = coeffs.reshape(coeffs.shape[0], coeffs.shape[1], -1)
    mags = np.abs(flat).max(axis=2)
    rho = fit_decay(mags.astype(np.complex128), band)
    return BlockSymbolGrid(lo, coeffs, rho)


def build_block_Tn(a: BlockSymbolGrid, n: int) -> DenseComplexMatrix:
    """(n kappa) x (n kappa) block section with block (l, m) given by the
    Fourier coefficient (a_{(l+m)/2})_{l-m}; reduces to build_Tn for
    kappa = 1."""
    kappa = a.kappa
    K = a.band
    if a.tx_min > 2 or a.tx_max < 2 * n:
        raise RangeError("block grid does not cover x in [1, n]")
    M = np.zeros((n * kappa, n * kappa), dtype=np.complex128)
    for l in range(1, n + 1):
        for m in range(max(1, l - K), min(n, l + K) + 1):
            d = l - m
            if abs(d) > K:
                continue
            blk = a.coeffs[(l + m) - a.tx_min, K + d]
            M[(l - 1) * kappa : l * kappa, (m - 1) * kappa : m * kappa] = blk
    return DenseComplexMatrix(M, "block")


# ---------------------------------------------------------------------------
# BOCG identity


@dataclass
class BocgReport:
    lhs: LogDet
    log_numerator: complex
    log_denominator: complex
    log_diagonal: complex
    residual: float
    budgets: dict = field(default_factory=dict)

    @property
    def rhs_log(self) -> complex:
        return self.log_numerator - self.log_denominator + self.log_diagonal


def _hankel_pair(factors: dict, win: WindowSpec):
    """The two BOCG Hankel symbols c = a_-^L * (a_+^R)^{-1*} and
    d = ((a_-^R)^{-1*} * a_+^L)~."""
    fl: FactorPair = factors["left"]
    fr: FactorPair = factors["right"]
    if fl.side != LEFT or fr.side != RIGHT:
        raise ValueError("factors dict must carry a Left and a Right pair")
    inv_rp = star_inverse(fr.plus, win)
    inv_rm = star_inverse(fr.minus, win)
    c = star_product(fl.minus, inv_rp)
    e = star_product(inv_rm, fl.plus)
    d = reflect(e, 0)
    return c, d


def _hankel_fredholm(c: SymbolGrid, d: SymbolGrid, n: int, win: WindowSpec):
    """log det(I - H(z^{-n} * c) H(d * z^{-n})) on a section sized by the
    coefficient decay, with the discarded-tail estimate.

    n = 0 gives the BOCG denominator: by the Toeplitz-Hankel splitting,
    T(c) T(c^{-1*}) = I - H(c) H((c^{-1*})~), so the operator-determinant
    denominator is the same Fredholm determinant without the index shift.
    """
    rho = min(max(math.sqrt(max(c.decay_rho, 1e-16) * max(d.decay_rho, 1e-16)), 1e-8), 0.95)
    n_h = int(math.ceil(math.log(win.tol) / math.log(rho))) + 6
    while n_h >= 4:
        try:
            H1 = build_hankel(c, n_h, n_h, row_shift=n).entries
            H2 = build_hankel(d, n_h, n_h, col_shift=n).entries
            break
        except RangeError:
            n_h -= 2
    else:
        raise RangeError("Hankel section too small: factor grids do not cover it")
    tail = rho ** (2 * (n + n_h)) / max(1.0 - rho * rho, 0.05)
    if tail > win.tol * 1e3:
        raise RangeError(f"Hankel section too small: tail estimate {tail:.2e}")
    Kmat = np.eye(n_h, dtype=np.complex128) - H1 @ H2
    ld = logdet(DenseComplexMatrix(Kmat, "Hankel product"))
    return ld.value, {"hankel_size": n_h, "tail": tail}


def bocg_evaluate(a: SymbolGrid, n: int, factors: dict, win: WindowSpec) -> BocgReport:
    """Evaluate both sides of the exact BOCG identity at size n.

    ``factors`` maps "left"/"right" to FactorPairs whose grids extend far
    enough beyond [1, n] for the Hankel sections and star inverses
    involved.  The residual is |exp(lhs_log - rhs_log) - 1|.
    """
    lhs = logdet(build_Tn(a, n))
    c, d = _hankel_pair(factors, win)
    log_num, bud_num = _hankel_fredholm(c, d, n, win)
    log_den, bud_den = _hankel_fredholm(c, d, 0, win)
    fl = factors["left"]
    diag = 0.0 + 0.0j
    for j in range(1, n + 1):
        diag += np.log(fl.plus.coeff(j, 0)) + np.log(fl.minus.coeff(j, 0))
    report = BocgReport(
        lhs=lhs,
        log_numerator=log_num,
        log_denominator=log_den,
        log_diagonal=diag,
        residual=np.nan,
        budgets={"numerator_tail": bud_num["tail"], "denominator_tail": bud_den["tail"],
                 "hankel_size": bud_num["hankel_size"]},
    )
    report.residual = float(abs(np.exp(lhs.value - report.rhs_log) - 1.0))
    return report


def hankel_decay_probe(a: SymbolGrid, factors: dict, n_list, win: WindowSpec):
    """|numerator - 1| across n, with a fitted exponential rate.

    Values below the floor 1e-13 are excluded from the fit.  The fitted
    rate is compared against the product of the coefficient decays of the
    two Hankel symbols by the caller.
    """
    c, d = _hankel_pair(factors, win)
    seq = []
    for n in n_list:
        log_num, _ = _hankel_fredholm(c, d, int(n), win)
        seq.append((int(n), float(abs(np.exp(log_num) - 1.0))))
    pts = [(n, v) for n, v in seq if v > 1e-13]
    rate = np.nan
    if len(pts) >= 2:
        ns = np.array([p[0] for p in pts], dtype=float)
        vs = np.log([p[1] for p in pts])
        rate = float(np.exp(np.polyfit(ns, vs, 1)[0]))
    return {"sequence": seq, "fitted_rate": rate,
            "rho_product": float(c.decay_rho * d.decay_rho)}


# ---------------------------------------------------------------------------
# export


def write_matrix(path, m: DenseComplexMatrix, kappa: int = 1, extra: dict | None = None):
    """Column-major complex binary with a 16-byte header (magic, kappa, n)
    and a JSON sidecar."""
    n = m.n
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", kappa, n))
        fh.write(np.asfortranarray(m.entries).tobytes(order="F"))
    side = {"schema": "starszego/1", "kappa": kappa, "n": n,
            "dtype": "complex128", "layout": "column-major",
            "provenance": m.provenance}
    side.update(extra or {})
    with open(str(path) + ".json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)


def read_matrix(path) -> tuple[DenseComplexMatrix, int]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError("bad magic")
        kappa, n = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype=np.complex128)
    entries = data.reshape((n, n), order="F")
    prov = "star-Toeplitz"
    try:
        with open(str(path) + ".json") as fh:
            prov = json.load(fh).get("provenance", prov)
    except OSError:
        pass
    return DenseComplexMatrix(entries.copy(), prov), kappa
