import math

import numpy as np
import pytest

from starszego.catalogue import example2_builder, example3_builder
from starszego.errors import FactorizationError
from starszego.moyal import WindowSpec, star_product
from starszego.symbol import max_abs_diff, sample_symbol, smooth_to_grid
from starszego.wiener_hopf import (
    LEFT,
    RIGHT,
    TridiagonalSpec,
    _CornerSeries,
    _psi_exprs,
    log_factor_sum,
    numeric_factorize,
    psi_expansion,
    psi_recursion_oracle,
    tridiagonal_factorize,
    tridiagonal_symbol,
)

CONST = TridiagonalSpec.constant(2.0, 1.0, 0.25)


class TestTridiagonalSymbol:
    def test_constant_spec_values(self):
        a = tridiagonal_symbol(CONST, -10, 10)
        assert abs(a.coeff(0, 0) - 2.25) < 1e-15
        assert abs(a.coeff(0, 1) - 1.0) < 1e-15
        assert abs(a.coeff(0, -1) - 0.5) < 1e-15

    def test_diagonal_decoupling(self):
        spec = TridiagonalSpec.constant(1.7, 0.0, 0.0)
        a = tridiagonal_symbol(spec, -5, 5)
        assert np.allclose(a.col(0), 1.7)
        assert np.abs(a.col(1)).max() == 0.0

    def test_example2_builds(self):
        b = example2_builder(0.5)
        a = b.make_grid(-30, 30, 1, 8)
        assert b.tridiagonal.zero_star_winding()
        assert np.isfinite(a.coeffs).all()

    def test_near_singular_rejected(self):
        bad = TridiagonalSpec.constant(1.0, 1.0, 1.0)  # gap = 0
        with pytest.raises(FactorizationError):
            tridiagonal_symbol(bad, -5, 5)


class TestTridiagonalFactorize:
    def test_constant_right_factors(self):
        fr = tridiagonal_factorize(CONST, RIGHT, -10, 10)
        assert abs(fr.minus.coeff(0, 0) - 1.0) < 1e-15
        assert abs(fr.minus.coeff(0, -1) - 0.25) < 1e-15
        assert abs(fr.plus.coeff(0, 0) - 2.0) < 1e-15
        assert abs(fr.plus.coeff(0, 1) - 1.0) < 1e-15

    def test_constant_left_factors(self):
        fl = tridiagonal_factorize(CONST, LEFT, -10, 10)
        assert abs(fl.plus.coeff(0, 0) - 2.0) < 1e-15
        assert abs(fl.plus.coeff(0, 1) - 1.0) < 1e-15
        assert abs(fl.minus.coeff(0, -1) - 0.25) < 1e-15

    @pytest.mark.parametrize("omega", [0.5, 1.0])
    @pytest.mark.parametrize("side", [LEFT, RIGHT])
    def test_example2_star_reconstruction(self, omega, side):
        b = example2_builder(omega)
        a = b.make_grid(-40, 40, 1, 8)
        pair = tridiagonal_factorize(b.tridiagonal, side, -40, 40)
        assert pair.residual_vs(a) < 1e-10

    def test_minus_normalization(self):
        b = example2_builder(0.5)
        for side in (LEFT, RIGHT):
            pair = tridiagonal_factorize(b.tridiagonal, side, -20, 20)
            assert np.allclose(pair.minus.col(0), 1.0)
            assert np.abs(pair.minus.col(1)).max() == 0.0  # no positive modes
            assert np.abs(pair.plus.col(-1)).max() == 0.0  # no negative modes


class TestNumericFactorize:
    def test_identity_factors(self):
        from starszego.symbol import unit_symbol

        a = unit_symbol(-20, 20)
        pair = numeric_factorize(a, RIGHT, WindowSpec(margin=4))
        assert np.allclose(pair.minus.col(0), 1.0)
        assert np.allclose(pair.plus.col(0), 1.0)

    def test_toeplitz_matches_classical(self):
        t = 0.5
        a = sample_symbol(lambda x, p: np.exp(2 * t * np.cos(p)), -40, 40, 16, 128)
        pair = numeric_factorize(a, RIGHT, WindowSpec(margin=12))
        for k in range(0, 8):
            assert abs(pair.minus.coeff(0, -k) - t ** k / math.factorial(k)) < 1e-8
            assert abs(pair.plus.coeff(0, k) - t ** k / math.factorial(k)) < 1e-8

    @pytest.mark.parametrize("side", [LEFT, RIGHT])
    def test_example2_matches_closed_form(self, side):
        b = example2_builder(0.5)
        a = b.make_grid(-60, 60, 1, 8)
        closed = tridiagonal_factorize(b.tridiagonal, side, -60, 60)
        num = numeric_factorize(a, side, WindowSpec(margin=14))
        for lo, hi in [(-20, 20)]:
            assert max_abs_diff(num.minus, closed.minus, x_lo=lo, x_hi=hi) < 1e-8
            assert max_abs_diff(num.plus, closed.plus, x_lo=lo, x_hi=hi) < 1e-8

    def test_triangular_structure(self):
        b = example2_builder(0.5)
        a = b.make_grid(-40, 40, 1, 8)
        pair = numeric_factorize(a, LEFT, WindowSpec(margin=10))
        K = pair.minus.band
        for k in range(1, K + 1):
            assert np.abs(pair.minus.col(k)).max() < 1e-14
        assert np.allclose(pair.minus.col(0), 1.0)
        for k in range(1, pair.plus.band + 1):
            assert np.abs(pair.plus.col(-k)).max() < 1e-14

    def test_window_margin_uniqueness(self):
        b = example2_builder(0.5)
        a = b.make_grid(-60, 60, 1, 8)
        p1 = numeric_factorize(a, RIGHT, WindowSpec(margin=10))
        p2 = numeric_factorize(a, RIGHT, WindowSpec(margin=20))
        assert max_abs_diff(p1.minus, p2.minus, x_lo=-20, x_hi=20) < 1e-8
        assert max_abs_diff(p1.plus, p2.plus, x_lo=-20, x_hi=20) < 1e-8

    def test_pivot_breakdown_detected(self):
        a = sample_symbol(lambda x, p: np.exp(1j * p) + 0.1 * np.exp(2j * p),
                          -15, 15, 2, 16)
        with pytest.raises(FactorizationError):
            numeric_factorize(a, LEFT, WindowSpec(margin=4))


class TestPsiExpansion:
    def test_explicit_matches_recursion(self):
        s = example3_builder(0.1).smooth
        cs = _CornerSeries(s, 128)
        for side in (LEFT, RIGHT):
            psis = _psi_exprs(side)
            for m in (1, 2):
                explicit = cs.eval_expr(psis[m], 0.37)
                recursed = psi_recursion_oracle(s, side, m, 0.37, n_p=128)
                assert np.abs(explicit - recursed).max() < 1e-13

    def test_x_independent_collapses_to_classical(self):
        from starszego.catalogue import smooth_exp_symbol

        s = smooth_exp_symbol(0.2, {"form": "const", "amplitude": 0.5}, 0.1)
        for order in (0, 2):
            mn, pl = psi_expansion(s, RIGHT, order)
            p = np.linspace(0, 2 * np.pi, 17)[:-1]
            # classical factors e^{(log f)^pm} of exp(0.2 - 0.5 cos p)
            ref_m = np.exp(-0.25 * np.exp(-1j * p))
            ref_p = np.exp(0.2 - 0.25 * np.exp(1j * p))
            assert np.abs(mn.fn(0.3, p) - ref_m).max() < 1e-12
            assert np.abs(pl.fn(0.3, p) - ref_p).max() < 1e-12

    def test_order0_is_frozen_x_factorization(self):
        s = example3_builder(0.2).smooth
        mn, pl = psi_expansion(s, LEFT, 0)
        y = 0.6
        p = np.linspace(0, 2 * np.pi, 33)[:-1]
        h, J = np.sin(y), np.cos(y)
        ref_m = np.exp(-J / 2 * np.exp(-1j * p))
        ref_p = np.exp(h - J / 2 * np.exp(1j * p))
        assert np.abs(mn.fn(y, p) - ref_m).max() < 1e-12
        assert np.abs(pl.fn(y, p) - ref_p).max() < 1e-12

    @pytest.mark.parametrize("side", [LEFT, RIGHT])
    @pytest.mark.parametrize("order", [0, 1, 2])
    def test_reconstruction_order_scaling(self, side, order):
        errs = []
        for nu in (0.2, 0.1):
            s = example3_builder(nu).smooth
            K, n_p = 20, 128
            W = 0.6 / nu
            mn, pl = psi_expansion(s, side, order)
            gm = smooth_to_grid(mn, -W - K, W + K, K, n_p)
            gp = smooth_to_grid(pl, -W - K, W + K, K, n_p)
            prod = star_product(gm, gp) if side == RIGHT else star_product(gp, gm)
            ag = smooth_to_grid(s, prod.x_min, prod.x_max, K, n_p)
            errs.append(max_abs_diff(prod, ag, x_lo=-W, x_hi=W))
        ratio = errs[0] / errs[1]
        target = 2.0 ** (order + 1)
        assert target / 1.6 < ratio < target * 1.6


class TestLogFactorSum:
    def test_x_independent_returns_g(self):
        from starszego.catalogue import smooth_exp_symbol

        s = smooth_exp_symbol(0.1, {"form": "const", "amplitude": 0.4}, 0.1)
        for order in (0, 1, 2):
            out = log_factor_sum(s, RIGHT, order)
            p = np.linspace(0, 2 * np.pi, 9)[:-1]
            assert np.abs(out.fn(0.5, p) - s.log_deriv(0, 0)(0.5, p)).max() < 1e-12

    def test_side_antisymmetry_at_order1(self):
        s = example3_builder(0.1).smooth
        l1 = log_factor_sum(s, LEFT, 1)
        r1 = log_factor_sum(s, RIGHT, 1)
        g0 = log_factor_sum(s, RIGHT, 0)
        p = np.linspace(0, 2 * np.pi, 17)[:-1]
        lv, rv, gv = l1.fn(0.3, p), r1.fn(0.3, p), g0.fn(0.3, p)
        assert np.abs(lv + rv - 2 * gv).max() < 1e-13
        assert np.abs(lv - rv).max() > 1e-3

    @pytest.mark.parametrize("side", [LEFT, RIGHT])
    def test_exp_reconstructs_symbol_order2(self, side):
        # exp of the order-2 sum equals f times (1 + O(nu^2) splitting data);
        # the star product of the implied factors closes at O(nu^3), which is
        # exercised through psi_expansion; here check the pointwise identity
        # log f+ + log f- = g + sigma (i nu/2){g-,g+} + nu^2(...) against a
        # direct evaluation from the psi factors
        s = example3_builder(0.1).smooth
        out = log_factor_sum(s, side, 2)
        mn, pl = psi_expansion(s, side, 2)
        y = 0.4
        p = np.linspace(0, 2 * np.pi, 65)[:-1]
        direct = np.log(mn.fn(y, p)) + np.log(pl.fn(y, p))
        series = out.fn(y, p)
        # both represent log f+ + log f- up to O(nu^3)
        assert np.abs(direct - series).max() < 5e-4 * (0.1 / 0.1) ** 3 + 2e-4


def test_left_right_sigma_signs():
    # the order-1 psi term must close the star product for each side;
    # swapping sides must break it at O(nu)
    nu = 0.1
    s = example3_builder(nu).smooth
    K, n_p = 18, 96
    W = 0.4 / nu
    mn, pl = psi_expansion(s, RIGHT, 1)
    gm = smooth_to_grid(mn, -W - K, W + K, K, n_p)
    gp = smooth_to_grid(pl, -W - K, W + K, K, n_p)
    good = star_product(gm, gp)
    bad = star_product(gp, gm)
    ag = smooth_to_grid(s, good.x_min, good.x_max, K, n_p)
    e_good = max_abs_diff(good, ag, x_lo=-W, x_hi=W)
    e_bad = max_abs_diff(bad, ag, x_lo=-W, x_hi=W)
    assert e_good * 5 < e_bad
