"""Named invariant suites: one executable check per documented property.

Each check returns (ok, measured) where measured is a small JSON-friendly
value worth keeping in the report. Checks run on deliberately small grids;
`verify all` is a release gate, not a benchmark. Module functions are looked
up through their module namespace at call time so a monkeypatched (or
genuinely broken) operation fails the matching invariant instead of a stale
reference passing silently.
"""

from __future__ import annotations

import numpy as np

from . import cauchy as cauchy_mod
from . import elliptic as elliptic_mod
from . import field as field_mod
from . import interpolation as interp_mod
from . import landis as landis_mod
from . import multiplier as mult_mod
from . import similarity as sim_mod
from . import stream as stream_mod
from .field import ComplexField, GridSpec, RealField


def _order(coarse: float, fine: float) -> float:
    if fine == 0:
        return np.inf
    return float(np.log2(coarse / fine))


# -- field -------------------------------------------------------------------


def _check_stencil_order():
    errs = {}
    for n in (32, 64):
        spec = GridSpec(0j, 1.0, n)
        X, Y = spec.meshes()
        f = RealField(spec, np.sin(2 * X + Y))
        got = field_mod.dx(f).values
        errs[n] = np.abs(got - 2 * np.cos(2 * X + Y))[2:-2, 2:-2].max()
    order = _order(errs[32], errs[64])
    return order >= 1.9, {"order": order}


def _check_dbar_kills_holomorphic():
    spec = GridSpec(0j, 1.0, 48)
    Z = spec.points()
    f = ComplexField(spec, Z**2)
    sup = np.abs(field_mod.dbar(f).values)[2:-2, 2:-2].max()
    return sup <= 1e-12, {"sup": float(sup)}


def _check_io_roundtrip(tmp_dir="/tmp"):
    import os
    import tempfile

    spec = GridSpec(0.3 + 0.1j, 0.7, 16)
    rng = np.random.default_rng(7)
    f = ComplexField(spec, rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)))
    fd, path = tempfile.mkstemp(suffix=".ucpf", dir=tmp_dir)
    os.close(fd)
    try:
        field_mod.write_field(path, f)
        g = field_mod.read_field(path)
        ok = g.spec.same_geometry(f.spec) and np.array_equal(g.values, f.values)
    finally:
        os.unlink(path)
    return ok, {"bytes_equal": bool(ok)}


# -- elliptic ------------------------------------------------------------------


def _check_exact_solution_regression():
    errs = {}
    for n in (32, 64):
        spec = GridSpec(0j, 1.0, n)
        X, _ = spec.meshes()
        lam = 1.5
        V = RealField(spec, np.full((n, n), lam**2))
        u = elliptic_mod.solve_dirichlet(V, lambda x, y: np.exp(lam * x))
        errs[n] = float(np.abs(u.values - np.exp(lam * X)).max())
        if errs[n] > 10.0 * spec.h**2:
            return False, {"err": errs[n], "cap": 10.0 * spec.h**2, "n": n}
    order = _order(errs[32], errs[64])
    return order >= 1.8, {"order": order, "errs": errs}


def _check_maximum_principle():
    spec = GridSpec(0j, 1.0, 32)
    V = RealField(spec, np.ones((32, 32)))
    u = elliptic_mod.solve_dirichlet(V, lambda x, y: 1.0 + 0.2 * np.cos(x + y))
    ring = field_mod.boundary_ring_mask(spec)
    inside_max = u.values[~ring].max()
    ring_max = u.values[ring].max()
    ok = inside_max <= ring_max + 1e-12 and u.values.min() > 0
    return ok, {"inside_max": float(inside_max), "ring_max": float(ring_max)}


# -- multiplier ----------------------------------------------------------------


def _check_multiplier_bracket():
    spec = GridSpec(0j, 1.5, 48)
    lam = 1.2
    pot = elliptic_mod.gen_potential(3, lam, 0.3, spec)
    m = mult_mod.build_multiplier(mult_mod.shifted_potential(pot), lam, delta=0.3)
    lo = mult_mod.subsolution(spec, lam).values
    hi = mult_mod.supersolution_value(lam)
    ok = bool((m.phi.values > 0).all() and (m.phi.values <= hi + 1e-9).all())
    margin = float((m.phi.values / lo).min())
    return ok, {"sub_ratio_min": margin, "sup_value": hi}


def _check_multiplier_equation():
    errs = {}
    lam = 1.0
    for n in (32, 64):
        spec = GridSpec(0j, 1.5, n)
        V = RealField(spec, np.full((n, n), 2.0 * lam**2))
        m = mult_mod.build_multiplier(V, lam)
        lap = field_mod.laplacian(m.phi).values
        r = np.abs(lap - V.values * m.phi.values)[2:-2, 2:-2].max()
        errs[n] = float(r / m.phi.values.max())
    # The builder converges the discrete five-point equation itself, so the
    # residual sits at roundoff on every grid; assert exactness, not an order.
    ok = all(e <= 1e-9 for e in errs.values())
    return ok, {"errs": errs}


# -- cauchy --------------------------------------------------------------------


def _check_dbar_inverse():
    spec = GridSpec(0j, 1.0, 48)
    op = cauchy_mod.CauchyOp.from_spec(spec)
    X, Y = spec.meshes()
    F = ComplexField(spec, np.exp(1j * X) * np.cos(Y))
    res = cauchy_mod.dbar_inverse_residual(op, F)
    return res <= 5e-2, {"residual": float(res)}


def _check_kernel_mass_bands():
    op = cauchy_mod.CauchyOp.from_spec(GridSpec(0j, 1.0, 64))
    mass = cauchy_mod.kernel_mass(op)
    R = 0.6
    disk = cauchy_mod.kernel_mass(op.patch, cauchy_mod.disk_mask(op.patch, 0j, R))
    ref = 2 * np.pi * R
    ok = 0.5 * ref <= disk <= 2.0 * ref and abs(disk - ref) <= 0.03 * ref
    return ok and mass > 0, {"disk_mass": float(disk), "ref": float(ref)}


# -- similarity ----------------------------------------------------------------


def _check_contraction_gate():
    from fractions import Fraction

    part = sim_mod.make_partition(Fraction(2, 9))
    spec = sim_mod.partition_grid(part, q=8)
    A = sim_mod.random_matrix_field(spec, 11, 0.25)
    op = cauchy_mod.CauchyOp.from_spec(spec)
    sol = sim_mod.global_solve(A, op)
    ok = sol.certificates["residual"] <= 5e-2
    return ok, {"residual": sol.certificates["residual"],
                "method": sol.certificates["method"]}


def _check_majorant_identity_fixture():
    from fractions import Fraction

    part = sim_mod.make_partition(Fraction(2, 5))
    n = 60
    g_list = sim_mod.identity_gluing(part, n)
    schedule = sim_mod.make_schedule(part)
    _, cert = sim_mod.majorant(g_list, schedule, part, n)
    bnd = cert["boundary"]
    rel = abs(bnd["log_value_at_last_interface"] - bnd["nominal_log_constant"])
    rel /= abs(bnd["nominal_log_constant"])
    bands = all(e["left_band_ok"] and e["right_band_ok"] for e in cert["interfaces"])
    ok = rel <= 1e-9 and bands and cert["subharmonic_ok"]
    return ok, {"interface_rel_err": rel, "bands_ok": bands}


# -- stream --------------------------------------------------------------------


def _check_grad_curl_identities():
    spec = GridSpec(0j, 1.0, 32)
    X, Y = spec.meshes()
    f = RealField(spec, np.sin(X) * np.cos(2 * Y))
    delta = 0.7
    F = stream_mod.nabla_delta(f, delta)
    curl = stream_mod.curl_delta(F, delta)
    sup = max(np.abs(c).max() for c in curl.components())
    scale = max(np.abs(c).max() for c in F.components())
    return sup <= 1e-12 * scale, {"sup": float(sup)}


def _check_stream_residuals_refine():
    vals = {}
    for n in (32, 64):
        spec = GridSpec(0j, 1.0, n)
        lam, delta = 1.5, 0.7
        lam_p = np.sqrt(lam**2 + delta**2)
        X, _ = spec.meshes()
        u = RealField(spec, np.exp(lam * X))
        m = mult_mod.Multiplier(
            phi=RealField(spec, np.exp(lam_p * X)),
            log_phi=RealField(spec, lam_p * X),
            lam=lam, delta=0.0, iterations=0, bounds_certificate={})
        s = stream_mod.build_stream(u, m, delta)
        vals[n] = stream_mod.residuals(s, "stream_system")
    order = _order(vals[32], vals[64])
    return order >= 0.9, {"order": order, "residuals": vals}


# -- interpolation -------------------------------------------------------------


def _check_theta_arithmetic():
    theta, ratio = interp_mod.theta_exponent(0.5, 10.0)
    ok = abs(1.0 / theta - 29.413) <= 2e-3 and ratio >= 1.8
    return ok, {"one_over_theta": 1.0 / theta, "ratio": ratio}


def _check_monomial_margin():
    margin = interp_mod.three_circle_check(lambda z: z**5, 0.2, 0.45, 0.8)
    return abs(margin) <= 1e-9, {"margin": float(margin)}


# -- landis --------------------------------------------------------------------


def _check_schedule_closed_form():
    import math

    c = 0.999 * 100 ** (2.0 / 3.0) / math.log(100.0)
    sched = landis_mod.run_schedule(0.2, 1.0, 100.0, c=c)
    err = sched.certificates["closed_form_max_err"]
    ok = err <= 1e-12 and sched.N == 43 and sched.certificates["ratio_ok"]
    return ok, {"closed_form_max_err": err, "N": sched.N}


def _check_step_arithmetic():
    res = landis_mod.step(landis_mod.StepInput(S=100.0, alpha=1.5, eps=0.2))
    ok = abs(res.R - 231.957) <= 5e-4 and abs(res.beta - 1.45) <= 1e-9
    return ok, {"R": res.R, "beta": res.beta}


SUITES = {
    "field": [
        ("first_derivative_second_order", _check_stencil_order),
        ("dbar_annihilates_holomorphic", _check_dbar_kills_holomorphic),
        ("field_io_roundtrip_exact", _check_io_roundtrip),
    ],
    "elliptic": [
        ("exact_solution_regression", _check_exact_solution_regression),
        ("positive_potential_maximum_principle", _check_maximum_principle),
    ],
    "multiplier": [
        ("bracket_ordering", _check_multiplier_bracket),
        ("equation_residual_roundoff", _check_multiplier_equation),
    ],
    "cauchy": [
        ("dbar_inverse_residual", _check_dbar_inverse),
        ("kernel_mass_bands", _check_kernel_mass_bands),
    ],
    "similarity": [
        ("global_solve_residual", _check_contraction_gate),
        ("majorant_identity_fixture", _check_majorant_identity_fixture),
    ],
    "stream": [
        ("curl_of_gradient_vanishes", _check_grad_curl_identities),
        ("stream_system_residual_refines", _check_stream_residuals_refine),
    ],
    "interpolation": [
        ("theta_worked_arithmetic", _check_theta_arithmetic),
        ("monomial_three_circle_margin", _check_monomial_margin),
    ],
    "landis": [
        ("closed_form_matches_iteration", _check_schedule_closed_form),
        ("step_worked_arithmetic", _check_step_arithmetic),
    ],
}


def run_verify(suite: str = "all") -> dict:
    """Run one suite (or all) and return the stable-schema report."""
    if suite == "all":
        names = list(SUITES)
    elif suite in SUITES:
        names = [suite]
    else:
        raise ValueError(
            f"unknown suite {suite!r}, expected 'all' or one of {sorted(SUITES)}"
        )
    report = {"suites": {}, "ok": True}
    for name in names:
        checks = []
        suite_ok = True
        for check_name, fn in SUITES[name]:
            try:
                ok, measured = fn()
            except Exception as exc:  # noqa: BLE001 - failures are findings
                ok, measured = False, {"error": f"{type(exc).__name__}: {exc}"}
            ok = bool(ok)
            checks.append({"name": check_name, "ok": ok, "measured": measured})
            suite_ok &= ok
        report["suites"][name] = {"ok": suite_ok, "checks": checks}
        report["ok"] &= suite_ok
    return report
