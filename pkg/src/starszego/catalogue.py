"""Named example symbols and the symbol definition file format.

Catalogue entries return builder objects so the CLI and the tests can
sample grids, factors, and smooth forms consistently.  The JSON file
format mirrors the catalogue:

    {"kind": "tridiagonal" | "smooth-exp" | "fourier-table" | "block-pauli",
     ... parameters per kind ...,
     "grid": {"x_min": -40, "x_max": 40, "K": 16, "N_p": 128}}

Function-valued parameters come from a fixed closed-form vocabulary
(constants, sin/cos profiles, the sech dip); arbitrary expressions are
deliberately not parsed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError
from .finite_sections import BlockSymbolGrid, sample_block_symbol
from .symbol import SmoothSymbol, SymbolGrid, sample_symbol
from .wiener_hopf import TridiagonalSpec

_PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


def _profile(spec):
    """Closed-form profile with all derivatives: constants, a*sin(w y),
    a*cos(w y), or a + b/cosh(w y)."""
    if isinstance(spec, (int, float, complex)):
        val = complex(spec)
        return lambda m: (lambda y: val + 0.0 * np.asarray(y)) if m == 0 else (
            lambda y: 0.0 * np.asarray(y))
    form = spec.get("form")
    a = complex(spec.get("amplitude", 1.0))
    w = float(spec.get("frequency", 1.0))
    if form == "const":
        return _profile(a)
    if form in ("sin", "cos"):
        base = [np.sin, np.cos, lambda y: -np.sin(y), lambda y: -np.cos(y)]
        off = 0 if form == "sin" else 1

        def deriv(m):
            f = base[(off + m) % 4]
            return lambda y: a * w ** m * f(w * np.asarray(y))

        return deriv
    if form == "sech-dip":
        # a + depth / cosh(w y); tridiagonal specs consume values only
        b = complex(spec.get("depth", -2.0 / 3.0))

        def deriv(m):
            if m == 0:
                return lambda y: a + b / np.cosh(w * np.asarray(y))
            raise ConfigError("sech-dip supplies values only")

        return deriv
    raise ConfigError(f"unknown profile form {form!r}")


@dataclass
class SymbolBuilder:
    """A catalogue entry: how to produce grids and auxiliary structures."""

    kind: str
    make_grid: callable  # (x_min, x_max, K, N_p) -> SymbolGrid
    tridiagonal: TridiagonalSpec | None = None
    smooth: SmoothSymbol | None = None
    block: callable | None = None  # (x_min, x_max, K, N_p) -> BlockSymbolGrid
    n_dependent: callable | None = None  # n -> SymbolBuilder
    params: dict | None = None


def identity_builder() -> SymbolBuilder:
    return SymbolBuilder(
        kind="identity",
        make_grid=lambda x_min, x_max, K, n_p: sample_symbol(
            lambda x, p: np.ones_like(p, dtype=complex), x_min, x_max, K, n_p),
        params={},
    )


def toeplitz_exp_builder(t: float = 0.5) -> SymbolBuilder:
    f = lambda x, p: np.exp(2.0 * t * np.cos(p))
    return SymbolBuilder(
        kind="toeplitz-exp",
        make_grid=lambda x_min, x_max, K, n_p: sample_symbol(f, x_min, x_max, K, n_p),
        params={"t": t},
    )


def tridiagonal_builder(f0=2.0, f1=1.0, fm1=0.25) -> SymbolBuilder:
    spec = TridiagonalSpec.constant(f0, f1, fm1)
    from .wiener_hopf import tridiagonal_symbol

    return SymbolBuilder(
        kind="tridiagonal",
        make_grid=lambda x_min, x_max, K, n_p: tridiagonal_symbol(spec, x_min, x_max),
        tridiagonal=spec,
        params={"f0": f0, "f1": f1, "fm1": fm1},
    )


def example2_builder(omega: float = 0.5) -> SymbolBuilder:
    spec = TridiagonalSpec(
        f0=lambda x: 1.0 - 2.0 / (3.0 * np.cosh(omega * np.asarray(x))),
        f1=lambda x: 0.5 + 0.0 * np.asarray(x),
        fm1=lambda x: 0.5 + 0.0 * np.asarray(x),
        f0_limits=(1.0, 1.0), f1_limits=(0.5, 0.5), fm1_limits=(0.5, 0.5),
    )
    from .wiener_hopf import tridiagonal_symbol

    return SymbolBuilder(
        kind="example2",
        make_grid=lambda x_min, x_max, K, n_p: tridiagonal_symbol(spec, x_min, x_max),
        tridiagonal=spec,
        params={"omega": omega},
    )


def smooth_exp_symbol(h_spec, J_spec, nu: float) -> SmoothSymbol:
    """g(y, p) = h(y) - J(y) cos p with closed-form derivatives."""
    h = _profile(h_spec)
    J = _profile(J_spec)
    cosd = [np.cos, lambda p: -np.sin(p), lambda p: -np.cos(p), np.sin]
    derivs = {}
    for m1 in range(5):
        for m2 in range(5):
            def ev(y, p, m1=m1, m2=m2):
                if m2 == 0:
                    return h(m1)(y) - J(m1)(y) * np.cos(p)
                return -J(m1)(y) * cosd[m2 % 4](p)

            derivs[(m1, m2)] = ev
    return SmoothSymbol.from_exponent(derivs[(0, 0)], nu, g_derivs=derivs)


def example3_builder(nu: float = 0.1, h_spec=None, J_spec=None) -> SymbolBuilder:
    h_spec = h_spec if h_spec is not None else {"form": "sin"}
    J_spec = J_spec if J_spec is not None else {"form": "cos"}
    s = smooth_exp_symbol(h_spec, J_spec, nu)
    from .symbol import smooth_to_grid

    return SymbolBuilder(
        kind="example3",
        make_grid=lambda x_min, x_max, K, n_p: smooth_to_grid(s, x_min, x_max, K, n_p),
        smooth=s,
        params={"nu": nu, "h": h_spec, "J": J_spec},
    )


def example4_profile(omega: float = 1.0):
    """Exponent g(t, p) = 1 + cos(2 w t) - cos(w t) cos p with all
    derivatives, wrapped at unit scale."""
    derivs = {}
    cosd = [np.cos, lambda q: -np.sin(q), lambda q: -np.cos(q), np.sin]
    for m1 in range(5):
        for m2 in range(5):
            def ev(t, p, m1=m1, m2=m2):
                t = np.asarray(t, dtype=float)
                h = (cosd[m1 % 4](2 * omega * t) * (2 * omega) ** m1
                     + (1.0 if m1 == 0 else 0.0))
                Jm = cosd[m1 % 4](omega * t) * omega ** m1
                if m2 == 0:
                    return h - Jm * np.cos(p)
                return -Jm * cosd[m2 % 4](p)

            derivs[(m1, m2)] = ev
    return SmoothSymbol.from_exponent(derivs[(0, 0)], 1.0, g_derivs=derivs)


def example4_builder(omega: float = 1.0) -> SymbolBuilder:
    prof = example4_profile(omega)
    g = prof.log_deriv(0, 0)

    def for_n(n: int) -> SymbolBuilder:
        rn = math.sqrt(n)
        f = lambda x, p: np.exp(g((x - 0.5) / rn, p))
        return SymbolBuilder(
            kind="example4",
            make_grid=lambda x_min, x_max, K, n_p: sample_symbol(f, x_min, x_max, K, n_p),
            smooth=prof,
            params={"omega": omega, "n": n},
        )

    return SymbolBuilder(
        kind="example4",
        make_grid=None,
        smooth=prof,
        n_dependent=for_n,
        params={"omega": omega},
    )


def pauli_left_factors(eps: float, gamma: float, h: float):
    """Left Wiener-Hopf log-factors n^{+-}(p) . sigma of the block
    example (lambda = 0, n = eps (cos p, gamma sin p, h))."""
    sx, sy, sz = _PAULI

    def nplus_mat(p):
        return eps * (np.exp(1j * p) / 2.0 * sx
                      + gamma * np.exp(1j * p) / 2.0j * sy + h * sz)

    def nminus_mat(p):
        return eps * (np.exp(-1j * p) / 2.0 * sx
                      - gamma * np.exp(-1j * p) / 2.0j * sy)

    return nplus_mat, nminus_mat


def pauli_block_inputs(eps: float, gamma: float, h: float, n_p: int = 256) -> dict:
    """Inputs for the block boundary formula on the Pauli example.

    The left log-factors are the given n^{+-}(p) . sigma; the right ones
    are produced perturbatively by matching the BCH series of
    exp(B') exp(A') = exp(A) exp(B) order by order in eps (through
    eps^3) and splitting each correction into its Fourier half-lines.
    """
    from .phasefn import fourier_interp
    from .symbol import ProjectionKind

    p = 2.0 * np.pi * np.arange(n_p) / n_p
    nplus, nminus = pauli_left_factors(eps, gamma, h)
    A = np.stack([nplus(pj) for pj in p])
    B = np.stack([nminus(pj) for pj in p])

    def comm(X, Y):
        return np.einsum("pij,pjk->pik", X, Y) - np.einsum("pij,pjk->pik", Y, X)

    modes = np.fft.fftfreq(n_p, d=1.0 / n_p)

    def proj(vals, plus: bool):
        hat = np.fft.fft(vals, axis=0)
        mask = (modes >= 0) if plus else (modes < 0)
        return np.fft.ifft(hat * mask[:, None, None], axis=0)

    c2 = comm(A, B)
    a2, b2 = proj(c2, True), proj(c2, False)
    c3 = -0.5 * (comm(B, a2) + comm(b2, A))
    a3, b3 = proj(c3, True), proj(c3, False)
    Ap, Bp = A + a2 + a3, B + b2 + b3

    def mbr(X, Y):
        return -1.0j * comm(X, Y)

    def phi(c, d):
        br = mbr(c, d)
        return d + (1.0j / 3.0) * br + (1.0 / 12.0) * mbr(br, d)

    beta_L = A + B
    beta_R = Ap + Bp
    gamma_L = proj(phi(A, B), False) + proj(phi(-B, -A), True)
    gamma_R = proj(phi(Bp, Ap), True) + proj(phi(-Ap, -Bp), False)
    log_a = A + B + 0.5 * c2 + (1.0 / 12.0) * (comm(A, c2) + comm(B, comm(B, A)))
    trace_bulk = log_a.mean(axis=0)

    def as_fn(vals):
        hat = np.fft.fft(vals, axis=0) / n_p

        def fn(q):
            ph = np.exp(1j * np.asarray(q, dtype=float) * modes)
            return np.tensordot(ph, hat, axes=(0, 0)) if np.ndim(q) == 0 else np.einsum(
                "qm,mij->qij", np.exp(1j * np.outer(q, modes)), hat)

        return fn

    closed = eps ** 2 / 2.0 * (1.0 + gamma ** 2 + 2.0 * h * gamma * eps)
    return {
        "betaL": as_fn(beta_L), "betaR": as_fn(beta_R),
        "gammaL": as_fn(gamma_L), "gammaR": as_fn(gamma_R),
        "trace_bulk": trace_bulk, "closed_form": closed,
        "right_factor_logs": (Bp, Ap), "left_factor_logs": (A, B), "p_grid": p,
    }


def block_pauli_builder(eps: float = 0.1, gamma: float = 0.5, h: float = 0.3) -> SymbolBuilder:
    nplus, nminus = pauli_left_factors(eps, gamma, h)

    def F(x, p):
        return scipy.linalg.expm(nplus(p)) @ scipy.linalg.expm(nminus(p))

    return SymbolBuilder(
        kind="block-pauli",
        make_grid=None,
        block=lambda x_min, x_max, K, n_p: sample_block_symbol(F, x_min, x_max, K, n_p),
        params={"epsilon": eps, "gamma": gamma, "h": h},
    )


_CATALOGUE = {
    "identity": identity_builder,
    "toeplitz-exp": toeplitz_exp_builder,
    "tridiagonal": tridiagonal_builder,
    "example2": example2_builder,
    "example3": example3_builder,
    "example4": example4_builder,
    "block-pauli": block_pauli_builder,
}


def catalogue_entry(name: str, **overrides) -> SymbolBuilder:
    if name not in _CATALOGUE:
        raise ConfigError(f"unknown catalogue symbol {name!r}; "
                          f"known: {sorted(_CATALOGUE)}")
    return _CATALOGUE[name](**overrides)


def load_symbol_file(path) -> SymbolBuilder:
    """Build a symbol from a JSON definition file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read symbol file {path}: {exc}") from exc
    kind = doc.get("kind")
    grid = doc.get("grid", {})
    if kind == "tridiagonal":
        raw = [doc.get("f0", 2.0), doc.get("f1", 1.0), doc.get("fm1", 0.25)]
        if all(isinstance(r, (int, float, complex)) for r in raw):
            b = tridiagonal_builder(*raw)
        else:
            fns = [_profile(r)(0) for r in raw]

            def limits(r):
                if isinstance(r, (int, float, complex)):
                    return (complex(r), complex(r))
                base = complex(r.get("amplitude", 1.0))
                if r.get("form") == "sech-dip":
                    return (base, base)
                raise ConfigError("x-dependent tridiagonal profiles must have limits "
                                  "(const or sech-dip)")

            spec = TridiagonalSpec(
                f0=fns[0], f1=fns[1], fm1=fns[2],
                f0_limits=limits(raw[0]), f1_limits=limits(raw[1]),
                fm1_limits=limits(raw[2]),
            )
            from .wiener_hopf import tridiagonal_symbol

            b = SymbolBuilder(
                kind="tridiagonal",
                make_grid=lambda x_min, x_max, K, n_p: tridiagonal_symbol(spec, x_min, x_max),
                tridiagonal=spec,
                params=doc,
            )
    elif kind == "smooth-exp":
        b = example3_builder(doc.get("nu", 0.1), doc.get("h"), doc.get("J"))
    elif kind == "block-pauli":
        b = block_pauli_builder(doc.get("epsilon", 0.1), doc.get("gamma", 0.5),
                                doc.get("h", 0.3))
    elif kind == "fourier-table":
        entries = doc.get("entries", [])
        if not entries:
            raise ConfigError("fourier-table needs entries [[x, k, re, im], ...]")

        from .symbol import as_tx

        txs = [as_tx(e[0]) for e in entries]
        ks = [int(e[1]) for e in entries]
        K = max(abs(k) for k in ks)
        lo_doc = grid.get("x_min")
        hi_doc = grid.get("x_max")
        lo = as_tx(lo_doc) if lo_doc is not None else min(txs)
        hi = as_tx(hi_doc) if hi_doc is not None else max(txs)
        coeffs = np.zeros((hi - lo + 1, 2 * K + 1), dtype=np.complex128)
        for (x, k, re, im), tx in zip(entries, txs):
            if not lo <= tx <= hi:
                raise ConfigError(f"entry x={x} outside the declared grid")
            coeffs[tx - lo, K + int(k)] = re + 1j * im
        from .symbol import fit_decay

        tbl = SymbolGrid(lo, coeffs, fit_decay(coeffs, K))
        b = SymbolBuilder(kind="fourier-table",
                          make_grid=lambda *a: tbl, params=doc)
    else:
        raise ConfigError(f"unknown symbol kind {kind!r}")
    b.params = dict(b.params or {}, grid=grid)
    return b
