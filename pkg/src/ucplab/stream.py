"""Reduction of a divergence-form solution pair to a first-order system.

Given a solution u and a positive multiplier phi on the same grid, the
quotient v = u / phi satisfies div(phi^2 grad v) + delta^2 phi^2 v = 0. The
module carries out the change of variables to the stream pair

    w1 = phi^2 v,    w2 = v2 + i v1,

with v1 = phi^2 dy(v) / delta and v2 = -phi^2 dx(v) / delta, then the
unimodular twist alpha~ = conj(alpha) conj(w2)/w2, delta~ = delta
conj(w2)/w2 (zero where w2 vanishes), and finally the exponentially
corrected pair w~ = (e^{-T(2 alpha)} w1, e^{-T(alpha - alpha~)} w2) that
solves dbar w~ = G w~ with an off-diagonal coefficient matrix G.

Every displayed identity along the way has a residual verifier; residuals
are interior sups away from a fixed physical margin (corner quadrature
pollutes a boundary layer of fixed width) and are normalized by the
largest participating term so they read as relative errors.

The quotient direction needs 1/delta, so delta = 0 is rejected: the
classical limit would require a different derivation, not a numerical
guess.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import CauchyOp
from .field import ComplexField, RealField, d1_array, dbar
from .multiplier import Multiplier
from .similarity import MatrixField


@dataclass
class Vec3Field:
    """Three-component field over one grid; third slot is the delta channel."""

    spec: object
    F1: np.ndarray
    F2: np.ndarray
    F3: np.ndarray

    def __post_init__(self):
        shape = (self.spec.n, self.spec.n)
        for name in ("F1", "F2", "F3"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise ValueError(f"component {name} has shape {arr.shape}, grid wants {shape}")
            object.__setattr__(self, name, arr)

    def components(self):
        return (self.F1, self.F2, self.F3)

    def sup(self) -> float:
        return max(float(np.abs(c).max()) for c in self.components())


def nabla_delta(f, delta: float) -> Vec3Field:
    """(dx f, dy f, delta f)."""
    h = f.spec.h
    return Vec3Field(
        f.spec,
        d1_array(f.values, h, axis=1),
        d1_array(f.values, h, axis=0),
        delta * f.values,
    )


def div_delta(F: Vec3Field, delta: float) -> np.ndarray:
    """dx F1 + dy F2 + delta F3."""
    h = F.spec.h
    return (
        d1_array(F.F1, h, axis=1) + d1_array(F.F2, h, axis=0) + delta * F.F3
    )


def curl_delta(F: Vec3Field, delta: float) -> Vec3Field:
    """(dy F3 - delta F2, delta F1 - dx F3, dx F2 - dy F1)."""
    h = F.spec.h
    return Vec3Field(
        F.spec,
        d1_array(F.F3, h, axis=0) - delta * F.F2,
        delta * F.F1 - d1_array(F.F3, h, axis=1),
        d1_array(F.F2, h, axis=1) - d1_array(F.F1, h, axis=0),
    )


@dataclass
class StreamData:
    """All stages of the reduction. The twisted pair and the coefficient
    matrix start unset and are filled in by tilde_w / assemble_G once a
    transform operator for the working cube is available. phi_sq is kept
    so residual verifiers never have to divide by v."""

    delta: float
    v: RealField
    v1: RealField
    v2: RealField
    w1: ComplexField
    w2: ComplexField
    alpha: ComplexField
    alphatilde: ComplexField
    deltatilde: ComplexField
    phi_sq: RealField
    w1t: ComplexField | None = None
    w2t: ComplexField | None = None
    G: MatrixField | None = None


def build_stream(
    u: RealField,
    m: Multiplier,
    delta: float,
    w2_zero_threshold: float | None = None,
) -> StreamData:
    """Pointwise algebra from (u, phi) down to (w1, w2) and the twist data.

    The threshold decides where the "if w2 != 0" branch applies: where
    |w2| <= threshold both alpha~ and delta~ are set to zero. The default
    is machine-relative so it only fires on genuinely vanishing w2.
    """
    if delta == 0:
        raise ValueError("degenerate: stream inverse 1/delta undefined at delta = 0")
    if not u.spec.same_geometry(m.phi.spec):
        raise ValueError("u and phi live on different grids")
    spec = u.spec
    h = spec.h
    phi = m.phi.values
    phi_sq = phi * phi
    v = u.values / phi
    vx = d1_array(v, h, axis=1)
    vy = d1_array(v, h, axis=0)
    v1 = phi_sq * vy / delta
    v2 = -phi_sq * vx / delta
    w1 = (phi_sq * v).astype(complex)
    w2 = v2 + 1j * v1
    alpha = dbar(m.log_phi).values

    thr = 1e-12 * float(np.abs(w2).max()) if w2_zero_threshold is None else w2_zero_threshold
    live = np.abs(w2) > thr
    ratio = np.zeros_like(w2)
    np.divide(np.conj(w2), w2, out=ratio, where=live)
    alphatilde = np.conj(alpha) * ratio
    deltatilde = delta * ratio

    return StreamData(
        delta=delta,
        v=RealField(spec, v),
        v1=RealField(spec, v1),
        v2=RealField(spec, v2),
        w1=ComplexField(spec, w1),
        w2=ComplexField(spec, w2),
        alpha=ComplexField(spec, alpha),
        alphatilde=ComplexField(spec, alphatilde),
        deltatilde=ComplexField(spec, deltatilde),
        phi_sq=RealField(spec, phi_sq),
    )


def tilde_w(s: StreamData, T_op: CauchyOp) -> tuple[ComplexField, ComplexField]:
    """w~1 = e^{-T(2 alpha)} w1 and w~2 = e^{-T(alpha - alpha~)} w2."""
    spec = s.v.spec
    t2a = T_op.apply(2.0 * s.alpha.values)
    tdiff = T_op.apply(s.alpha.values - s.alphatilde.values)
    w1t = ComplexField(spec, np.exp(-t2a) * s.w1.values)
    w2t = ComplexField(spec, np.exp(-tdiff) * s.w2.values)
    s.w1t, s.w2t = w1t, w2t
    return w1t, w2t


def assemble_G(s: StreamData, T_op: CauchyOp) -> MatrixField:
    """Off-diagonal coefficient matrix of the twisted system."""
    spec = s.v.spec
    tsum = T_op.apply(s.alpha.values + s.alphatilde.values)
    zero = np.zeros_like(tsum)
    G = MatrixField(
        spec,
        zero,
        -(s.deltatilde.values / 2.0) * np.exp(-tsum),
        (s.delta / 2.0) * np.exp(tsum),
        zero.copy(),
    )
    s.G = G
    return G


RESIDUAL_KINDS = (
    "divergence_form",
    "stream_system",
    "dbar_w1",
    "dbar_w2",
    "vec_beltrami",
)


def _interior_sup(arr: np.ndarray) -> float:
    m = max(2, int(np.ceil(0.05 * min(arr.shape))))
    return float(np.abs(arr[m:-m, m:-m]).max())


def residuals(s: StreamData, which: str) -> float:
    """Interior sup of one displayed identity, relative to its largest term."""
    spec = s.v.spec
    h = spec.h
    d = s.delta

    if which == "divergence_form":
        flux_x = s.phi_sq.values * d1_array(s.v.values, h, axis=1)
        flux_y = s.phi_sq.values * d1_array(s.v.values, h, axis=0)
        second_order = d1_array(flux_x, h, axis=1) + d1_array(flux_y, h, axis=0)
        zeroth = d * d * s.phi_sq.values * s.v.values
        scale = max(_interior_sup(second_order), _interior_sup(zeroth))
        return _interior_sup(second_order + zeroth) / max(scale, 1e-300)

    if which == "stream_system":
        V = Vec3Field(spec, s.v1.values, s.v2.values, np.zeros_like(s.v1.values))
        lhs = curl_delta(V, d)
        rhs = nabla_delta(s.v, d)
        res = [a - s.phi_sq.values * b for a, b in zip(lhs.components(), rhs.components())]
        scale = max(_interior_sup(s.phi_sq.values * b) for b in rhs.components())
        return max(_interior_sup(r) for r in res) / max(scale, 1e-300)

    if which == "dbar_w1":
        terms = (
            dbar(s.w1).values,
            -2.0 * s.alpha.values * s.w1.values,
            (d / 2.0) * np.conj(s.w2.values),
        )
    elif which == "dbar_w2":
        terms = (
            dbar(s.w2).values,
            -(d / 2.0) * s.w1.values,
            -s.alpha.values * s.w2.values,
            np.conj(s.alpha.values) * np.conj(s.w2.values),
        )
    elif which == "vec_beltrami":
        if s.w1t is None or s.G is None:
            raise ValueError("tilde fields not assembled: run tilde_w and assemble_G first")
        r1 = dbar(s.w1t).values - s.G.a12 * s.w2t.values
        r2 = dbar(s.w2t).values - s.G.a21 * s.w1t.values
        scale = max(
            _interior_sup(dbar(s.w1t).values),
            _interior_sup(dbar(s.w2t).values),
            _interior_sup(s.G.a12 * s.w2t.values),
            _interior_sup(s.G.a21 * s.w1t.values),
        )
        return max(_interior_sup(r1), _interior_sup(r2)) / max(scale, 1e-300)
    else:
        raise ValueError(f"unknown residual kind {which!r}; choose from {RESIDUAL_KINDS}")

    scale = max(_interior_sup(t) for t in terms)
    return _interior_sup(sum(terms)) / max(scale, 1e-300)
