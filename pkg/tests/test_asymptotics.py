import math
from fractions import Fraction

import numpy as np
import pytest

from starszego.catalogue import (
    example2_builder,
    example3_builder,
    example4_builder,
    pauli_block_inputs,
    smooth_exp_symbol,
)
from starszego.errors import BranchCutError, RangeError
from starszego.finite_sections import build_Tn, logdet
from starszego.moyal import BchOrder, WindowSpec
from starszego.symbol import sample_symbol
from starszego.wiener_hopf import LEFT, RIGHT, numeric_factorize, tridiagonal_factorize
from starszego.asymptotics import (
    EMSeries,
    Prediction,
    _corner_data,
    block_boundary_formula,
    bulk_density,
    corner_constant,
    corner_constant_asymptotic,
    corner_density,
    e_classical,
    euler_maclaurin_sum,
    gauge_split,
    locally_half_prediction,
    locally_toeplitz_prediction,
    semiclassical_prediction,
    strong_formula,
    weak_ratio_prediction,
)


class TestEMSeries:
    def test_rational_coefficients(self):
        em = EMSeries(4)
        assert em.coefficients[0] == Fraction(1, 24)
        assert em.coefficients[1] == Fraction(-7, 5760)
        assert em.coefficients[2] == Fraction(31, 967680)
        assert em.coefficients[3] == Fraction(-127, 154828800)

    def test_quadratic_exact_k1(self):
        n, nu = 10, 0.3
        out = euler_maclaurin_sum(lambda y: y ** 2, n, nu, 1,
                                  derivs={2: lambda y: 2.0})
        exact = nu ** 2 * n * (n + 1) * (2 * n + 1) / 6
        assert abs(out - exact) < 1e-12 * exact

    def test_constant(self):
        out = euler_maclaurin_sum(lambda y: 3.7 + 0.0 * y, 12, 0.2, 0)
        assert abs(out - 12 * 3.7) < 1e-10

    def test_quartic_exact_k2(self):
        n, nu = 7, 0.5
        out = euler_maclaurin_sum(lambda y: y ** 4, n, nu, 2,
                                  derivs={2: lambda y: 12 * y ** 2,
                                          4: lambda y: 24.0})
        exact = nu ** 4 * sum(j ** 4 for j in range(1, n + 1))
        assert abs(out - exact) < 1e-12 * exact

    def test_fd_fallback(self):
        out = euler_maclaurin_sum(lambda y: y ** 2, 8, 0.4, 1)
        exact = 0.4 ** 2 * 8 * 9 * 17 / 6
        assert abs(out - exact) < 1e-7 * exact


class TestClassical:
    def test_e_classical_single_term(self):
        c = sample_symbol(lambda x, p: np.exp(2 * 0.5 * np.cos(p)), 0, 0, 16, 128)
        assert abs(e_classical(c) - 0.25) < 1e-12

    def test_e_classical_constant(self):
        c = sample_symbol(lambda x, p: 3.0 * np.ones_like(p), 0, 0, 0, 8)
        assert abs(e_classical(c)) < 1e-14

    def test_e_classical_one_sided(self):
        c = sample_symbol(lambda x, p: np.exp(0.5 * np.exp(1j * p)), 0, 0, 12, 64)
        assert abs(e_classical(c)) < 1e-12

    def test_winding_rejected(self):
        c = sample_symbol(lambda x, p: np.exp(1j * p) * 2.0, 0, 0, 2, 16)
        with pytest.raises(BranchCutError):
            e_classical(c)

    def test_x_dependent_rejected(self):
        c = sample_symbol(lambda x, p: 1 + 0.1 * x + 0.0 * p, 0, 3, 1, 8)
        with pytest.raises(RangeError):
            e_classical(c)

    def test_weak_ratio_values(self):
        from starszego.wiener_hopf import TridiagonalSpec

        spec = TridiagonalSpec.constant(2.0, 1.0, 0.25)
        fl = tridiagonal_factorize(spec, LEFT, 0, 80)
        assert abs(weak_ratio_prediction(fl, 60) - 2.0) < 1e-14
        # identity: factors 1 -> ratio 1
        from starszego.symbol import unit_symbol

        one = unit_symbol(-20, 80)
        flo = numeric_factorize(one, LEFT, WindowSpec(margin=5))
        assert abs(weak_ratio_prediction(flo, 40) - 1.0) < 1e-14
        # toeplitz exp: zeroth log coefficient vanishes -> ratio 1
        a = sample_symbol(lambda x, p: np.exp(np.cos(p)), -40, 80, 16, 128)
        fle = numeric_factorize(a, LEFT, WindowSpec(margin=12))
        assert abs(weak_ratio_prediction(fle, 30) - 1.0) < 1e-10


class TestStrongFormula:
    def test_toeplitz_reduction(self):
        t = 0.5
        a = sample_symbol(lambda x, p: np.exp(2 * t * np.cos(p)), -90, 90, 18, 128)
        fl = numeric_factorize(a, LEFT, WindowSpec(margin=12))
        fr = numeric_factorize(a, RIGHT, WindowSpec(margin=12))
        win = WindowSpec(margin=14, tol=1e-12)
        pred = strong_formula(a, 12, fl, fr, BchOrder(2), win)
        # E^R = E^L = E(a) and bulk = n (log a)_0 = 0
        assert abs(pred.corner_ul - 0.125) < 1e-9
        assert abs(pred.corner_br - 0.125) < 1e-9
        assert abs(pred.bulk) < 1e-9
        lhs = logdet(build_Tn(a, 12)).value
        assert abs(pred.total - lhs) < 1e-9

    def test_identity_symbol_all_zero(self):
        from starszego.symbol import unit_symbol

        a = unit_symbol(-60, 80)
        fl = numeric_factorize(a, LEFT, WindowSpec(margin=6))
        fr = numeric_factorize(a, RIGHT, WindowSpec(margin=6))
        pred = strong_formula(a, 10, fl, fr, BchOrder(1), WindowSpec(margin=8))
        assert abs(pred.total) < 1e-12

    def test_example2_residual_within_budget(self):
        b = example2_builder(0.5)
        a = b.make_grid(-130, 130, 1, 8)
        fl = tridiagonal_factorize(b.tridiagonal, LEFT, -130, 130)
        fr = tridiagonal_factorize(b.tridiagonal, RIGHT, -130, 130)
        win = WindowSpec(margin=16, tol=1e-12)
        pred = strong_formula(a, 30, fl, fr, BchOrder(2), win)
        lhs = logdet(build_Tn(a, 30)).value
        resid = abs(pred.total - lhs)
        rho_budget = 0.55 ** 30
        phi_est = pred.budgets["phi_truncation_estimate"]
        assert resid <= max(rho_budget, phi_est)
        # the residual is dominated by the Phi truncation, not the rho tail
        assert phi_est > rho_budget

    def test_phi_budget_covers_each_order(self):
        # Example 2 has no small parameter, so the BCH series is only
        # asymptotic; the drift budget must still cover the residual at
        # every implemented order
        b = example2_builder(0.5)
        a = b.make_grid(-100, 100, 1, 8)
        fl = tridiagonal_factorize(b.tridiagonal, LEFT, -100, 100)
        fr = tridiagonal_factorize(b.tridiagonal, RIGHT, -100, 100)
        win = WindowSpec(margin=14, tol=1e-12)
        lhs = logdet(build_Tn(a, 20)).value
        for order in (1, 2):
            pred = strong_formula(a, 20, fl, fr, BchOrder(order), win)
            resid = abs(pred.total - lhs)
            assert resid <= pred.budgets["phi_truncation_estimate"]


class TestSemiclassicalPrediction:
    def test_homogeneous_reduction(self):
        g = lambda y, p: 0.4 * np.cos(p) + 0.1 * np.sin(2 * p)
        derivs = {}
        for m1 in range(5):
            for m2 in range(5):
                def ev(y, p, m1=m1, m2=m2):
                    if m1 > 0:
                        return 0.0 * np.asarray(p)
                    c = [np.cos, lambda q: -np.sin(q), lambda q: -np.cos(q), np.sin]
                    s2 = [np.sin, np.cos, lambda q: -np.sin(q), lambda q: -np.cos(q)]
                    return 0.4 * c[m2 % 4](p) + 0.1 * 2 ** m2 * s2[m2 % 4](2 * p)

                derivs[(m1, m2)] = ev
        from starszego.symbol import SmoothSymbol

        s = SmoothSymbol.from_exponent(derivs[(0, 0)], 0.1, g_derivs=derivs)
        n = 30
        pred = semiclassical_prediction(s, n)
        a = sample_symbol(lambda x, p: np.exp(g(0, p)), 0, 2 * n + 2, 24, 128)
        lhs = logdet(build_Tn(a, n)).value
        e = e_classical(sample_symbol(lambda x, p: np.exp(g(0, p)), 0, 0, 24, 256))
        assert abs(pred.bulk) < 1e-10  # zero mean exponent
        assert abs(pred.corner_ul - e / 2) < 1e-8
        assert abs(pred.corner_br - e / 2) < 1e-8
        assert abs(pred.total - lhs) < 1e-8

    def test_zero_exponent(self):
        s = smooth_exp_symbol(0.0, 0.0, 0.1)
        pred = semiclassical_prediction(s, 10)
        assert abs(pred.total) < 1e-12

    def test_example3_closed_form_densities(self):
        nu = 0.1
        b = example3_builder(nu)
        for x in (3.0, 10.0, 25.0):
            y = x * nu
            h, hp, hpp = np.sin(y), np.cos(y), -np.sin(y)
            J, Jp, Jpp = np.cos(y), -np.sin(y), -np.cos(y)
            bulk_closed = h + nu ** 2 / 24 * (h * (J * Jpp + Jp ** 2) + J ** 2 * hpp)
            assert abs(bulk_density(b.smooth, x) - bulk_closed) < 1e-8 + 5 * nu ** 4
            c0_closed = J ** 2 / 8
            c1_closed = nu * (hp * (J ** 2 - 2) - (3 + 2 * h) * J * Jp) / 48
            cm = corner_density(b.smooth, x, -1)
            cp = corner_density(b.smooth, x, +1)
            assert abs(cm - (c0_closed - c1_closed)) < 1e-8 + 5 * nu ** 2
            assert abs(cp - (c0_closed + c1_closed)) < 1e-8 + 5 * nu ** 2

    def test_relative_residual_ratio_fixed_n_nu(self):
        res = {}
        for nu in (0.2, 0.1):
            n = round(4 / nu)
            b = example3_builder(nu)
            a = b.make_grid(0, 2 * n + 2, 24, 128)
            lhs = logdet(build_Tn(a, n)).value
            pred = semiclassical_prediction(b.smooth, n)
            res[nu] = abs(lhs - pred.total) / abs(lhs)
        assert 6.0 <= res[0.2] / res[0.1] <= 20.0

    def test_error_scaling_budget(self):
        # the absolute residual with D0+D2+C0+C1 follows A n nu^4 + B nu^2
        # (the unprinted second-order corner term): the fitted nu^2
        # coefficient must be stable across the sweep
        coef = {}
        for nu in (0.2, 0.1, 0.05):
            n = round(4 / nu)
            b = example3_builder(nu)
            a = b.make_grid(0, 2 * n + 2, 24, 128)
            lhs = logdet(build_Tn(a, n)).value
            pred = semiclassical_prediction(b.smooth, n)
            coef[nu] = abs(lhs - pred.total) / nu ** 2
        vals = list(coef.values())
        assert max(vals) / min(vals) < 1.3

    def test_order_toggles(self):
        b = example3_builder(0.1)
        full = semiclassical_prediction(b.smooth, 10)
        d0 = semiclassical_prediction(b.smooth, 10, orders=("d0",))
        assert d0.corner_ul == 0.0 and d0.corner_br == 0.0
        d2 = semiclassical_prediction(b.smooth, 10, orders=("d0", "d2"))
        assert abs((d2.bulk - d0.bulk)) > 0.0
        assert full.order_tags == ("d0", "d2", "c0", "c1")
        with pytest.raises(ValueError):
            semiclassical_prediction(b.smooth, 10, orders=("d7",))

    def test_gauge_transformation_invariance(self):
        # moving a total-x-derivative between bulk and corners leaves the
        # total unchanged: G = g d1g integrates to boundary values
        import starszego.phasefn as pf
        from starszego.asymptotics import _mean_p, _quad_complex

        b = example3_builder(0.1)
        n = 12
        base = semiclassical_prediction(b.smooth, n)
        Gexpr = pf.Leaf(0, 0) * pf.Leaf(1, 0)
        dG = Gexpr.d(0)
        extra_bulk, _ = _quad_complex(lambda x: _mean_p(dG, b.smooth, x, 256),
                                      0.5, n + 0.5, epsabs=1e-12, epsrel=1e-12)
        new_bulk = base.bulk + extra_bulk
        new_ul = base.corner_ul + _mean_p(Gexpr, b.smooth, 0.5, 256)
        new_br = base.corner_br - _mean_p(Gexpr, b.smooth, n + 0.5, 256)
        total = new_bulk + new_ul + new_br
        assert abs(total - base.total) < 1e-9


class TestLocallyToeplitz:
    def test_x_independent_reduces_to_classical(self):
        g = lambda t, p: 0.6 * np.cos(p)
        pred = locally_toeplitz_prediction(g, 50)
        c = sample_symbol(lambda x, p: np.exp(g(0, p)), 0, 0, 16, 128)
        e = e_classical(c)
        assert abs(pred.total - (50 * 0.0 + e)) < 1e-9

    def test_zero(self):
        pred = locally_toeplitz_prediction(lambda t, p: 0.0 * p, 10)
        assert abs(pred.total) < 1e-12

    def test_linear_ramp_sweep(self):
        g = lambda t, p: t * np.cos(p)
        pred = locally_toeplitz_prediction(g, 10)
        assert abs(pred.total - 0.125) < 1e-9
        errs = []
        for n in (25, 50, 100):
            a = sample_symbol(lambda x, p, n=n: np.exp(g((x - 0.5) / n, p)),
                              0, 2 * n + 2, 20, 128)
            lhs = logdet(build_Tn(a, n)).value
            errs.append(abs(lhs - 0.125))
        # O(1/n): halving the error with each doubling
        assert 1.6 < errs[0] / errs[1] < 2.6
        assert 1.6 < errs[1] / errs[2] < 2.6


class TestLocallyHalf:
    def test_zero(self):
        s = smooth_exp_symbol(0.0, 0.0, 1.0)
        pred = locally_half_prediction(s, 16)
        assert abs(pred.total) < 1e-10

    def test_x_independent_strong_szego(self):
        s = smooth_exp_symbol(0.2, {"form": "const", "amplitude": 0.5}, 1.0)
        n = 25
        pred = locally_half_prediction(s, n)
        c = sample_symbol(lambda x, p: np.exp(0.2 - 0.5 * np.cos(p)), 0, 0, 16, 128)
        assert abs(pred.total - (n * 0.2 + e_classical(c))) < 1e-8

    def test_example4_closed_form(self):
        om = 1.0
        b = example4_builder(om)
        for n in (100, 400):
            pred = locally_half_prediction(b.smooth, n)
            rn = math.sqrt(n)
            closed = n + rn / (2 * om) * math.sin(2 * om * rn) + (
                3 + math.cos(2 * om * rn) - om ** 2) / 16.0
            # prediction and closed form agree up to the dropped
            # O(n^{-1/2}) pieces of the prediction integrals
            assert abs(pred.total - closed) < 5.0 / rn


@pytest.fixture(scope="module")
def gsym():
    return smooth_exp_symbol({"form": "sin", "frequency": 0.35},
                             {"form": "cos", "frequency": 0.22}, 1.0)


class TestGaugeSplit:
    MONOMIALS = [
        [(1, 0), (0, 1), (1, 1)],
        [(1, 1), (1, 1)],
        [(0, 1), (0, 1), (2, 0)],
        [(1, 0), (1, 0), (0, 2)],
        [(2, 0), (0, 2)],
    ]

    def test_plain_g_trivial(self, gsym):
        out = gauge_split([(0, 0)], gsym, 6)
        assert abs(out["Delta"]) < 1e-12
        assert abs(out["F"] - out["G"]) < 1e-10

    @pytest.mark.parametrize("mono", MONOMIALS)
    def test_f_equals_g_plus_delta(self, gsym, mono):
        out = gauge_split(mono, gsym, 6)
        assert out["mismatch"] < 1e-9

    def test_delta_zero_cases(self, gsym):
        out = gauge_split([(2, 0), (0, 2)], gsym, 6)
        assert abs(out["Delta"]) < 1e-10

    def test_mixed_square_boundary(self, gsym):
        out = gauge_split([(1, 1), (1, 1)], gsym, 6)
        assert abs(out["Delta"]) > 1e-6  # genuinely nonzero boundary piece
        assert out["mismatch"] < 1e-9


class TestBlockBoundary:
    def test_kappa1_reduces_to_strong_szego_constant(self):
        # scalar symbol exp(g): beta = g, gamma_R = gamma_L(with sign) and
        # the boundary term is E(a)
        n_p = 256
        p = 2 * np.pi * np.arange(n_p) / n_p
        g = 0.4 * np.cos(p) + 0.2 * np.sin(2 * p)
        hat = np.fft.fft(g) / n_p
        modes = np.fft.fftfreq(n_p, 1.0 / n_p)
        gt = np.fft.ifft(np.where(modes >= 0, hat * n_p, -hat * n_p))

        def interp(vals):
            h = np.fft.fft(vals) / n_p

            def fn(q):
                return np.array([[np.sum(h * np.exp(1j * q * modes))]])

            return fn

        beta = interp(g)
        gammaR = interp(gt)
        gammaL = interp(-gt)
        e_ref = float(np.sum(np.arange(1, n_p // 2)
                             * (hat[1:n_p // 2] * hat[-1:-n_p // 2:-1]).real))
        pred = block_boundary_formula(beta, beta, gammaL, gammaR, 7,
                                      np.array([[np.mean(g)]]))
        assert abs(pred.constant_terms["boundary"] - e_ref) < 1e-10
        assert abs(pred.bulk - 7 * np.mean(g)) < 1e-12

    def test_zero_gamma_pure_bulk(self):
        zero = lambda p: np.zeros((2, 2), dtype=complex)
        beta = lambda p: np.eye(2, dtype=complex) * np.cos(p)
        tb = np.diag([0.3, 0.1]).astype(complex)
        pred = block_boundary_formula(beta, beta, zero, zero, 9, tb)
        assert abs(pred.total - 9 * 0.4) < 1e-12

    def test_dimension_mismatch(self):
        b2 = lambda p: np.zeros((2, 2), dtype=complex)
        b3 = lambda p: np.zeros((3, 3), dtype=complex)
        with pytest.raises(ValueError):
            block_boundary_formula(b2, b3, b2, b2, 5, np.zeros((2, 2)))

    def test_pauli_example_closed_form(self):
        for eps in (0.2, 0.1):
            d = pauli_block_inputs(eps, 0.5, 0.3)
            pred = block_boundary_formula(d["betaL"], d["betaR"], d["gammaL"],
                                          d["gammaR"], 60, d["trace_bulk"])
            assert abs(pred.total - d["closed_form"]) < 4.0 * eps ** 4


class TestCornerAsymptotics:
    def test_cross_check_against_exact(self):
        errs = {}
        for nu in (0.2, 0.1):
            b = example3_builder(nu)
            a = b.make_grid(-70, 70, 22, 128)
            win = WindowSpec(margin=14, tol=1e-12)
            fr = numeric_factorize(a, RIGHT, win)
            bR = _corner_data(fr, BchOrder(2), win)
            exact, _ = corner_constant(*bR, 0.5)
            asym = corner_constant_asymptotic(b.smooth, RIGHT, 0.5)
            errs[nu] = abs(exact - asym)
        # components enter at order nu; agreement improves at >= nu^2
        assert errs[0.2] / errs[0.1] > 3.5
        assert errs[0.1] < 1e-3


class TestPredictionType:
    def test_total_consistency_enforced(self):
        with pytest.raises(ValueError):
            Prediction(1.0, 0.0, 0.0, {}, 5.0, ("d0",))

    def test_empty_tags_rejected(self):
        with pytest.raises(ValueError):
            Prediction.assemble(bulk=1.0, order_tags=())
