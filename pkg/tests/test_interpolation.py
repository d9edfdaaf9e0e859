"""Holomorphic factor extraction, circle norms, three-ball and vanishing."""

import numpy as np
import pytest

from ucplab.cauchy import CauchyOp
from ucplab.field import ComplexField, GridSpec, RealField, field_from_function
from ucplab.interpolation import (
    FactorResult,
    ThreeBallRecord,
    ball_sup,
    circle_max,
    holomorphic_factor,
    theta_exponent,
    three_ball_experiment,
    three_circle_check,
    vanishing_order_experiment,
)
from ucplab.multiplier import Multiplier
from ucplab.similarity import BeltramiSolution, MatrixField, global_solve
from ucplab.stream import assemble_G, build_stream, tilde_w


def _exp_multiplier(spec, rate, lam=None):
    X, _ = spec.meshes()
    return Multiplier(
        phi=RealField(spec, np.exp(rate * X)),
        log_phi=RealField(spec, rate * X),
        lam=rate if lam is None else lam,
        delta=0.0,
        iterations=0,
        bounds_certificate={},
    )


def _exact_chain(n, lam=1.5, delta=0.7, half=1.0):
    spec = GridSpec(0.0, half, n)
    lam_p = np.sqrt(lam**2 + delta**2)
    X, _ = spec.meshes()
    u = RealField(spec, np.exp(lam * X))
    m = _exp_multiplier(spec, lam_p, lam=lam)
    s = build_stream(u, m, delta)
    T_op = CauchyOp.from_spec(spec)
    tilde_w(s, T_op)
    G = assemble_G(s, T_op)
    sol = global_solve(G, T_op)
    return spec, u, m, s, sol


# -- holomorphic factor -----------------------------------------------------


class TestHolomorphicFactor:
    def test_identity_matrix_passthrough(self):
        spec = GridSpec(0.0, 1.0, 64)
        Z = spec.meshes()[0] + 1j * spec.meshes()[1]
        w1t = ComplexField(spec, Z**2)
        w2t = ComplexField(spec, Z**3 + 1.0)
        eye = MatrixField.identity(spec)
        sol = BeltramiSolution(P=eye, P_inv=eye, residual=0.0)
        fac = holomorphic_factor((w1t, w2t), sol)
        assert np.array_equal(fac.h1.values, w1t.values)
        assert np.array_equal(fac.h2.values, w2t.values)
        assert fac.residual < 1e-2

    def test_reconstruction(self):
        spec, u, m, s, sol = _exact_chain(48)
        fac = holomorphic_factor((s.w1t, s.w2t), sol)
        b1, b2 = sol.P.matvec(fac.h1.values, fac.h2.values)
        scale = max(np.abs(s.w1t.values).max(), np.abs(s.w2t.values).max())
        assert np.abs(b1 - s.w1t.values).max() <= 1e-8 * scale
        assert np.abs(b2 - s.w2t.values).max() <= 1e-8 * scale

    def test_residual_refines(self):
        res = {}
        for n in (48, 96):
            spec, u, m, s, sol = _exact_chain(n)
            res[n] = holomorphic_factor((s.w1t, s.w2t), sol).residual
        order = np.log2(res[48] / res[96])
        assert order >= 0.9, (res, order)


# -- circle maxima ----------------------------------------------------------


class TestCircleMax:
    def test_linear_field(self):
        spec = GridSpec(0.0, 1.0, 128)
        Z = spec.meshes()[0] + 1j * spec.meshes()[1]
        f = ComplexField(spec, Z)
        assert abs(circle_max(f, 0.0, 0.5) - 0.5) <= 2 * spec.h

    def test_constant_field(self):
        spec = GridSpec(0.0, 1.0, 32)
        f = ComplexField(spec, np.full((32, 32), 3.0 - 4.0j))
        assert circle_max(f, 0.0, 0.4) == pytest.approx(5.0, rel=1e-12)

    def test_callable_exact(self):
        assert circle_max(lambda z: z, 0.0, 0.37) == pytest.approx(0.37, rel=1e-14)

    def test_annulus_cross_check(self):
        spec = GridSpec(0.0, 1.0, 128)
        X, Y = spec.meshes()
        f = ComplexField(spec, np.exp(1j * (1.3 * X - 0.8 * Y)) * (1.0 + 0.5 * X))
        r = 0.55
        R = np.hypot(X, Y)
        ann = np.abs(f.values[(R >= r - 2 * spec.h) & (R <= r + 2 * spec.h)]).max()
        assert abs(circle_max(f, 0.0, r) - ann) <= 10 * spec.h

    def test_footprint_guard(self):
        spec = GridSpec(0.0, 1.0, 32)
        f = ComplexField(spec, np.zeros((32, 32), dtype=complex))
        with pytest.raises(ValueError, match="footprint"):
            circle_max(f, 0.5, 0.8)


# -- three circles ----------------------------------------------------------


class TestThreeCircle:
    def test_monomial_equality_case(self):
        for n in (1, 3, 7):
            margin = three_circle_check(lambda z: z**n, 0.2, 0.45, 0.8)
            assert abs(margin) <= 1e-12

    def test_exponential_margin(self):
        spec = GridSpec(0.0, 1.0, 256)
        Z = spec.meshes()[0] + 1j * spec.meshes()[1]
        f = ComplexField(spec, np.exp(Z))
        margin = three_circle_check(f, 0.25, 0.5, 0.75)
        assert margin >= -1e-3
        theta = np.log(0.75 / 0.5) / np.log(0.75 / 0.25)
        exact = theta * 0.25 + (1 - theta) * 0.75 - 0.5
        assert margin == pytest.approx(exact, abs=1e-2)

    def test_random_polynomial_suite(self):
        rng = np.random.default_rng(0x3C)
        for _ in range(100):
            deg = rng.integers(1, 11)
            coeffs = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
            margin = three_circle_check(
                lambda z: np.polyval(coeffs, z), 0.25, 0.5, 0.75
            )
            m_vals = [
                np.log(circle_max(lambda z: np.polyval(coeffs, z), 0.0, r))
                for r in (0.25, 0.5, 0.75)
            ]
            scale = max(1.0, *(abs(v) for v in m_vals))
            assert margin >= -1e-3 * scale

    def test_gridded_polynomial_margins(self):
        rng = np.random.default_rng(0x3D)
        spec = GridSpec(0.0, 1.0, 256)
        Z = spec.meshes()[0] + 1j * spec.meshes()[1]
        for _ in range(10):
            coeffs = rng.normal(size=4) + 1j * rng.normal(size=4)
            f = ComplexField(spec, np.polyval(coeffs, Z))
            margin = three_circle_check(f, 0.4, 0.6, 0.8)
            assert margin >= -1e-3

    def test_bad_radii(self):
        with pytest.raises(ValueError, match="radii"):
            three_circle_check(lambda z: z, 0.5, 0.4, 0.8)


# -- theta exponent ---------------------------------------------------------


class TestThetaExponent:
    def test_worked_arithmetic(self):
        theta, ratio = theta_exponent(0.5, 10.0)
        assert 1.0 / theta == pytest.approx(29.413, abs=2e-3)
        assert theta == pytest.approx(0.0340, abs=1e-4)

    def test_limit_near_one(self):
        F = 5.0
        d = 1.0 + 1.0 / (2.0 * F)
        limit = np.log(d) / np.log(2.0 * d)
        theta, _ = theta_exponent(0.999, F)
        assert abs(theta - limit) <= 0.01 * limit

    def test_monotonicity(self):
        t1, _ = theta_exponent(0.5, 2.0)
        t2, _ = theta_exponent(0.5, 8.0)
        assert t2 < t1
        t3, _ = theta_exponent(0.1, 2.0)
        assert t3 < t1

    def test_ratio_bounded_below(self):
        for lam in (4.0, 10.0, 25.0):
            for F in (1.0, np.sqrt(lam), lam):
                for r in (0.1, 0.5):
                    _, ratio = theta_exponent(r, F)
                    assert ratio >= 1.8

    def test_guards(self):
        with pytest.raises(ValueError, match="r must"):
            theta_exponent(1.5, 2.0)
        with pytest.raises(ValueError, match="F_lambda"):
            theta_exponent(0.5, 0.5)


# -- three-ball experiment ---------------------------------------------------


class TestThreeBall:
    def test_flat_solution_nonpositive_constant(self):
        spec = GridSpec(0.0, 2.2, 96)
        u = RealField(spec, np.ones((96, 96)))
        m = _exp_multiplier(spec, 0.0, lam=1.0)
        s = build_stream(u, m, 0.5)
        rec = three_ball_experiment(u, m, s, None, 0.25, 1.0)
        assert rec.norm_u_B1 == 1.0
        assert rec.norm_u_Br == 1.0
        assert rec.norm_u_Bb == 1.0
        assert rec.implied_C <= 0.0

    def test_exponential_closed_form(self):
        lam, delta, r, F = 1.5, 0.7, 0.25, 1.0
        spec = GridSpec(0.0, 2.2, 192)
        lam_p = np.sqrt(lam**2 + delta**2)
        X, _ = spec.meshes()
        u = RealField(spec, np.exp(lam * X))
        m = _exp_multiplier(spec, lam_p, lam=lam)
        s = build_stream(u, m, delta)
        rec = three_ball_experiment(u, m, s, None, r, F)
        b = 1.0 + 1.0 / F
        theta = rec.theta
        expected = (
            lam + np.log(delta) - theta * (lam * r - np.log(r)) - (1 - theta) * lam * b
        ) / lam
        assert rec.implied_C == pytest.approx(expected, rel=5e-2)
        assert rec.norm_u_B1 == pytest.approx(np.exp(lam), rel=1e-2)
        assert rec.norm_u_Bb == pytest.approx(np.exp(lam * b), rel=1e-2)

    def test_intermediate_norms_recorded(self):
        spec, u, m, s, sol = _exact_chain(96, half=2.2)
        rec = three_ball_experiment(u, m, s, sol, 0.25, 1.0)
        assert rec.norm_w1t_Bd is not None
        assert rec.norm_w2t_Brhalf is not None
        assert np.isfinite(rec.implied_C_w1)
        assert np.isfinite(rec.implied_C_w2)

    def test_degenerate_rejected(self):
        spec = GridSpec(0.0, 2.2, 96)
        u = RealField(spec, np.zeros((96, 96)))
        m = _exp_multiplier(spec, 0.0, lam=1.0)
        s = build_stream(RealField(spec, np.ones((96, 96))), m, 0.5)
        with pytest.raises(ValueError, match="degenerate norm"):
            three_ball_experiment(u, m, s, None, 0.25, 1.0)


# -- vanishing order ---------------------------------------------------------


class TestVanishingOrder:
    def test_monomial_real_part_slope(self):
        n_pow = 2
        spec = GridSpec(0.0, 2.1, 384)
        f = field_from_function(spec, lambda x, y: ((x + 1j * y) ** n_pow).real)
        rec = vanishing_order_experiment(
            f, float(n_pow), float(n_pow), r_grid=np.geomspace(0.5, 0.15, 7)
        )
        assert rec.fitted_exponent == pytest.approx(n_pow, abs=0.05)
        assert rec.r_grid[0] > rec.r_grid[-1]
        assert rec.min_radius_cells > 10

    def test_exponential_no_vanishing(self):
        lam = 3.0
        spec = GridSpec(0.0, 2.1, 384)
        X, _ = spec.meshes()
        u = RealField(spec, np.exp(lam * (X - 1.0)))  # sup over B_1 is exactly 1
        wide = vanishing_order_experiment(
            u, lam, lam, r_grid=np.geomspace(0.5, 0.1, 6)
        )
        narrow = vanishing_order_experiment(
            u, lam, lam, r_grid=np.geomspace(0.2, 0.05, 6)
        )
        assert narrow.fitted_exponent < wide.fitted_exponent
        assert narrow.fitted_exponent < 0.5

    def test_hypothesis_breach_identified(self):
        lam = 3.0
        spec = GridSpec(0.0, 2.1, 128)
        X, _ = spec.meshes()
        grower = RealField(spec, np.exp(lam * X))
        with pytest.raises(ValueError, match="B_b"):
            vanishing_order_experiment(grower, lam, lam, C1=0.1)
        tiny = RealField(spec, 1e-12 * np.ones((128, 128)))
        with pytest.raises(ValueError, match="B_1"):
            vanishing_order_experiment(tiny, lam, lam, c1=0.1, p=1.0)

    def test_bound_enforced_when_supplied(self):
        spec = GridSpec(0.0, 2.1, 256)
        f = field_from_function(spec, lambda x, y: ((x + 1j * y) ** 3).real)
        with pytest.raises(ValueError, match="exceeds"):
            vanishing_order_experiment(
                f, 3.0, 3.0, r_grid=np.geomspace(0.5, 0.15, 6), C_hat=0.01
            )
        rec = vanishing_order_experiment(
            f, 3.0, 3.0, r_grid=np.geomspace(0.5, 0.15, 6), C_hat=1.0
        )
        assert rec.bound_exponent == pytest.approx(9.0)

    def test_fitted_constant_recorded(self):
        spec = GridSpec(0.0, 2.1, 256)
        f = field_from_function(spec, lambda x, y: ((x + 1j * y) ** 2).real)
        rec = vanishing_order_experiment(
            f, 2.0, 2.0, r_grid=np.geomspace(0.5, 0.15, 6)
        )
        assert rec.C_hat == pytest.approx(rec.fitted_exponent / 4.0)
        assert rec.bound_exponent == pytest.approx(rec.fitted_exponent)
