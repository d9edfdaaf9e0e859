"""Delta-calculus identities and the stream reduction residuals."""

import numpy as np
import pytest

from ucplab.cauchy import CauchyOp, c_infty_estimate
from ucplab.field import GridSpec, RealField, d1_array, dbar, gradient
from ucplab.multiplier import Multiplier
from ucplab.stream import (
    RESIDUAL_KINDS,
    Vec3Field,
    assemble_G,
    build_stream,
    curl_delta,
    div_delta,
    nabla_delta,
    residuals,
    tilde_w,
)


def _smooth(spec, seed, modes=4):
    rng = np.random.default_rng([seed, 0x7])
    X, Y = spec.meshes()
    out = np.zeros_like(X)
    for _ in range(modes):
        kx, ky = rng.uniform(-2, 2, size=2)
        out += rng.normal() * np.cos(kx * X + ky * Y + rng.uniform(0, 7))
    return RealField(spec, out)


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


def _exact_pair(spec, lam, delta):
    lam_p = np.sqrt(lam**2 + delta**2)
    X, _ = spec.meshes()
    u = RealField(spec, np.exp(lam * X))
    m = _exp_multiplier(spec, lam_p, lam=lam)
    return u, m


# -- delta calculus ---------------------------------------------------------


class TestDeltaCalculus:
    def test_delta_zero_reduces_to_2d(self):
        spec = GridSpec(0.0, 1.0, 32)
        f = _smooth(spec, 1)
        nd = nabla_delta(f, 0.0)
        assert np.all(nd.F3 == 0.0)
        assert np.array_equal(nd.F1, d1_array(f.values, spec.h, axis=1))

    def test_curl_of_gradient_vanishes(self):
        # the stencils along different axes commute exactly, so this
        # identity holds to roundoff, not just to O(h^2)
        spec = GridSpec(0.0, 1.0, 32)
        f = _smooth(spec, 2)
        c = curl_delta(nabla_delta(f, 0.7), 0.7)
        scale = nabla_delta(f, 0.7).sup()
        assert c.sup() <= 1e-13 * scale

    def test_div_of_curl_vanishes(self):
        spec = GridSpec(0.0, 1.0, 32)
        F = Vec3Field(
            spec, _smooth(spec, 3).values, _smooth(spec, 4).values, _smooth(spec, 5).values
        )
        d = div_delta(curl_delta(F, 1.3), 1.3)
        assert np.abs(d).max() <= 1e-13 * max(F.sup(), 1.0)

    def test_double_curl_identity(self):
        # curl curl F + (lap + delta^2) F - nabla div F = 0 at second order
        from ucplab.field import laplacian

        delta = 0.9
        sups = {}
        for n in (48, 96):
            spec = GridSpec(0.0, 1.0, n)
            F = Vec3Field(
                spec,
                _smooth(spec, 6).values,
                _smooth(spec, 7).values,
                _smooth(spec, 8).values,
            )
            cc = curl_delta(curl_delta(F, delta), delta)
            dv = RealField(spec, div_delta(F, delta))
            nd = nabla_delta(dv, delta)
            res = 0.0
            for c, f, g in zip(cc.components(), F.components(), nd.components()):
                lap = laplacian(RealField(spec, f)).values
                r = c + lap + delta**2 * f - g
                res = max(res, np.abs(r[4:-4, 4:-4]).max())
            sups[n] = res
        assert sups[96] < 0.3 * sups[48]


# -- reduction algebra ------------------------------------------------------


class TestBuildStream:
    def test_u_equal_phi(self):
        spec = GridSpec(0.0, 1.0, 48)
        _, m = _exact_pair(spec, 1.2, 0.5)
        s = build_stream(RealField(spec, m.phi.values.copy()), m, 0.5)
        assert np.all(s.v.values == 1.0)
        assert np.all(s.v1.values == 0.0)
        assert np.all(s.w2.values == 0.0)
        assert np.allclose(s.w1.values, m.phi.values**2, rtol=1e-14, atol=0)
        assert np.all(s.alphatilde.values == 0.0)
        assert np.all(s.deltatilde.values == 0.0)
        # constant v keeps the zeroth-order load delta^2 phi^2 intact, so
        # the relative divergence-form residual is exactly one
        assert residuals(s, "divergence_form") == pytest.approx(1.0, abs=1e-12)

    def test_linear_u_unit_phi(self):
        spec = GridSpec(0.0, 1.0, 32)
        X, _ = spec.meshes()
        u = RealField(spec, X.copy())
        m = _exp_multiplier(spec, 0.0)
        s = build_stream(u, m, 1.0)
        assert np.abs(s.v1.values).max() < 1e-13
        assert np.abs(s.v2.values + 1.0).max() < 1e-13
        assert np.abs(s.w1.values - X).max() < 1e-13
        assert np.abs(s.w2.values + 1.0).max() < 1e-13
        assert np.abs(s.deltatilde.values - 1.0).max() < 1e-13
        T_op = CauchyOp.from_spec(spec)
        G = assemble_G(s, T_op)
        assert np.abs(np.abs(G.a12) - 0.5).max() < 1e-13
        assert np.abs(np.abs(G.a21) - 0.5).max() < 1e-13
        assert np.all(G.a11 == 0) and np.all(G.a22 == 0)

    def test_recomputation_oracle(self):
        spec = GridSpec(0.0, 1.0, 40)
        delta = 0.8
        u = _smooth(spec, 11)
        m = _exp_multiplier(spec, 0.9)
        s = build_stream(u, m, delta)
        phi2 = m.phi.values**2
        v = u.values / m.phi.values
        assert np.abs(s.v.values - v).max() < 1e-12
        v1 = phi2 * d1_array(v, spec.h, axis=0) / delta
        v2 = -phi2 * d1_array(v, spec.h, axis=1) / delta
        assert np.abs(s.v1.values - v1).max() < 1e-12 * max(1, np.abs(v1).max())
        assert np.abs(s.v2.values - v2).max() < 1e-12 * max(1, np.abs(v2).max())
        assert np.abs(s.w2.values - (v2 + 1j * v1)).max() < 1e-12 * np.abs(v2).max()
        assert np.abs(s.w1.values - phi2 * v).max() == 0.0
        alpha = dbar(m.log_phi).values
        assert np.abs(s.alpha.values - alpha).max() == 0.0

    def test_modulus_preservation(self):
        spec = GridSpec(0.0, 1.0, 40)
        u, m = _exact_pair(spec, 1.4, 0.6)
        s = build_stream(u, m, 0.6)
        live = np.abs(s.w2.values) > 0
        assert live.all()
        assert np.allclose(
            np.abs(s.alphatilde.values), np.abs(s.alpha.values), rtol=1e-12, atol=1e-15
        )
        assert np.allclose(np.abs(s.deltatilde.values), 0.6, rtol=1e-12)

    def test_delta_zero_rejected(self):
        spec = GridSpec(0.0, 1.0, 32)
        u, m = _exact_pair(spec, 1.0, 0.5)
        with pytest.raises(ValueError, match="degenerate"):
            build_stream(u, m, 0.0)

    def test_grid_mismatch_rejected(self):
        u = _smooth(GridSpec(0.0, 1.0, 32), 1)
        m = _exp_multiplier(GridSpec(0.0, 1.0, 48), 0.5)
        with pytest.raises(ValueError, match="different grids"):
            build_stream(u, m, 0.5)

    def test_unknown_residual_kind(self):
        spec = GridSpec(0.0, 1.0, 32)
        u, m = _exact_pair(spec, 1.0, 0.5)
        s = build_stream(u, m, 0.5)
        with pytest.raises(ValueError, match="unknown residual"):
            residuals(s, "no_such_identity")

    def test_tilde_required_for_vec_beltrami(self):
        spec = GridSpec(0.0, 1.0, 32)
        u, m = _exact_pair(spec, 1.0, 0.5)
        s = build_stream(u, m, 0.5)
        with pytest.raises(ValueError, match="not assembled"):
            residuals(s, "vec_beltrami")


# -- residual refinement ----------------------------------------------------


def _all_residuals(n, lam=1.5, delta=0.7):
    spec = GridSpec(0.0, 1.0, n)
    u, m = _exact_pair(spec, lam, delta)
    s = build_stream(u, m, delta)
    T_op = CauchyOp.from_spec(spec)
    tilde_w(s, T_op)
    assemble_G(s, T_op)
    return {k: residuals(s, k) for k in RESIDUAL_KINDS}


class TestExactPairResiduals:
    def test_refinement_order(self):
        coarse = _all_residuals(48)
        fine = _all_residuals(96)
        for kind in RESIDUAL_KINDS:
            assert fine[kind] < coarse[kind], kind
            order = np.log2(coarse[kind] / fine[kind])
            assert order >= 1.0, (kind, order, coarse[kind], fine[kind])
            assert fine[kind] <= 5e-2, (kind, fine[kind])

    def test_tilde_pair_is_unimodular_twist(self):
        spec = GridSpec(0.0, 1.0, 48)
        u, m = _exact_pair(spec, 1.5, 0.7)
        s = build_stream(u, m, 0.7)
        T_op = CauchyOp.from_spec(spec)
        w1t, w2t = tilde_w(s, T_op)
        t2a = T_op.apply(2.0 * s.alpha.values)
        assert np.allclose(
            np.abs(w1t.values),
            np.exp(-t2a.real) * np.abs(s.w1.values),
            rtol=1e-12,
        )

    def test_coefficient_norm_chain(self):
        # |G| <= (delta/2) exp(2 c_inf C3 lambda) with both constants measured
        spec = GridSpec(0.0, 1.0, 48)
        lam, delta = 1.5, 0.7
        u, m = _exact_pair(spec, lam, delta)
        s = build_stream(u, m, delta)
        T_op = CauchyOp.from_spec(spec)
        G = assemble_G(s, T_op)
        gx, gy = gradient(m.log_phi)
        c3_hat = float(np.hypot(gx.values, gy.values).max()) / lam
        c_inf = c_infty_estimate(48)
        bound = (delta / 2.0) * np.exp(2.0 * c_inf * c3_hat * lam)
        assert G.sup_opnorm() <= bound
