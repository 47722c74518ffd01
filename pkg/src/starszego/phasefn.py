"""Tiny expression algebra for phase-space functions of g and derivatives.

The semiclassical formulas are polynomials in the mixed derivatives of
g = log f and of its Fourier half-line projections (which commute with
derivatives).  Representing them as expression trees keeps every
x-derivative exact: differentiation happens symbolically and only the
leaves (derivatives of g) and the projections (FFT masks along the
p-axis) are evaluated numerically.

Evaluation contract: ``expr.ev(leaf, proj)`` where ``leaf(m1, m2)``
returns the values of d^m1_y d^m2_p g on a uniform p-grid (any leading
shape, p last) and ``proj(values, kind)`` applies a Fourier half-line
mask along the last axis.
"""

from __future__ import annotations

import numpy as np

from .symbol import ProjectionKind

PLUS = ProjectionKind.PLUS
MINUS = ProjectionKind.MINUS
TILDE = ProjectionKind.TILDE


class Expr:
    def d(self, slot: int) -> "Expr":
        raise NotImplementedError

    def ev(self, leaf, proj):
        raise NotImplementedError

    def __add__(self, other):
        return Sum([self, _wrap(other)])

    def __radd__(self, other):
        return Sum([_wrap(other), self])

    def __sub__(self, other):
        return Sum([self, Scale(-1.0, _wrap(other))])

    def __rsub__(self, other):
        return Sum([_wrap(other), Scale(-1.0, self)])

    def __neg__(self):
        return Scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, Expr):
            return Prod([self, other])
        return Scale(other, self)

    __rmul__ = __mul__


def _wrap(x) -> Expr:
    return x if isinstance(x, Expr) else Const(x)


class Const(Expr):
    def __init__(self, c):
        self.c = complex(c)

    def d(self, slot):
        return Const(0.0)

    def ev(self, leaf, proj):
        return self.c


class Leaf(Expr):
    """d^m1_y d^m2_p g."""

    def __init__(self, m1: int, m2: int):
        self.m1, self.m2 = m1, m2

    def d(self, slot):
        return Leaf(self.m1 + 1, self.m2) if slot == 0 else Leaf(self.m1, self.m2 + 1)

    def ev(self, leaf, proj):
        return leaf(self.m1, self.m2)


class Scale(Expr):
    def __init__(self, c, x: Expr):
        self.c, self.x = complex(c), x

    def d(self, slot):
        return Scale(self.c, self.x.d(slot))

    def ev(self, leaf, proj):
        return self.c * self.x.ev(leaf, proj)


class Sum(Expr):
    def __init__(self, terms):
        self.terms = list(terms)

    def d(self, slot):
        return Sum([t.d(slot) for t in self.terms])

    def ev(self, leaf, proj):
        acc = 0.0
        for t in self.terms:
            acc = acc + t.ev(leaf, proj)
        return acc


class Prod(Expr):
    def __init__(self, factors):
        self.factors = list(factors)

    def d(self, slot):
        terms = []
        for i in range(len(self.factors)):
            fs = list(self.factors)
            fs[i] = fs[i].d(slot)
            terms.append(Prod(fs))
        return Sum(terms)

    def ev(self, leaf, proj):
        acc = 1.0
        for f in self.factors:
            acc = acc * f.ev(leaf, proj)
        return acc


class Proj(Expr):
    """Fourier half-line projection of a subexpression (commutes with
    derivatives)."""

    def __init__(self, x: Expr, kind: ProjectionKind):
        self.x, self.kind = x, kind

    def d(self, slot):
        return Proj(self.x.d(slot), self.kind)

    def ev(self, leaf, proj):
        return proj(self.x.ev(leaf, proj), self.kind)


def pb(a: Expr, b: Expr) -> Expr:
    """Poisson bracket d1(a) d2(b) - d2(a) d1(b)."""
    return a.d(0) * b.d(1) - a.d(1) * b.d(0)


def g() -> Leaf:
    return Leaf(0, 0)


def gplus() -> Proj:
    return Proj(Leaf(0, 0), PLUS)


def gminus() -> Proj:
    return Proj(Leaf(0, 0), MINUS)


def gtilde() -> Proj:
    return Proj(Leaf(0, 0), TILDE)


# ---------------------------------------------------------------------------
# numerical backend


def fourier_project(vals: np.ndarray, kind: ProjectionKind) -> np.ndarray:
    """Half-line Fourier mask along the last axis of a uniform p-grid
    sample (k = 0 belongs to Plus)."""
    vals = np.asarray(vals, dtype=np.complex128)
    n = vals.shape[-1]
    modes = np.fft.fftfreq(n, d=1.0 / n)
    hat = np.fft.fft(vals, axis=-1)
    if kind is ProjectionKind.PLUS:
        hat = np.where(modes >= 0, hat, 0.0)
    elif kind is ProjectionKind.MINUS:
        hat = np.where(modes < 0, hat, 0.0)
    else:
        hat = np.where(modes >= 0, hat, -hat)
    return np.fft.ifft(hat, axis=-1)


def fourier_interp(grid_vals: np.ndarray, p) -> np.ndarray:
    """Evaluate the trigonometric interpolant of uniform-grid samples at
    arbitrary angles p."""
    n = grid_vals.shape[-1]
    hat = np.fft.fft(grid_vals, axis=-1) / n
    modes = np.fft.fftfreq(n, d=1.0 / n)
    p = np.asarray(p, dtype=float)
    phases = np.exp(1j * np.multiply.outer(p, modes))
    return np.tensordot(phases, hat, axes=([-1], [-1]))


def make_leaf_eval(sym, y, p_grid: np.ndarray):
    """Leaf evaluator over a fixed p-grid for a SmoothSymbol exponent."""

    cache = {}

    def leaf(m1: int, m2: int):
        key = (m1, m2)
        if key not in cache:
            cache[key] = np.asarray(sym.log_deriv(m1, m2)(y, p_grid), dtype=np.complex128)
        return cache[key]

    return leaf
