"""Positive multiplier for the shifted potential.

Solves Delta phi = V_delta phi by monotone iteration from above. Starting
point is the constant supersolution exp(sqrt(8) lambda); each sweep solves

    (-lap + 2 lambda^2) phi_next = (2 lambda^2 - V_delta) phi

with fixed Dirichlet data, which preserves ordering because the right-hand
side is monotone in phi and the shifted operator obeys a discrete maximum
principle. The exponential subsolution exp(sqrt(2) lambda x) brackets the
limit from below; both brackets are certified on the converged iterate.

phi spans exp(+-sqrt(8) lambda), so log phi is the primary representation
and every norm is taken in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import CachedDirichletSolver, Potential, _coerce_grid_values
from .field import (
    Ball,
    Cube,
    GridSpec,
    RealField,
    gradient,
    l2_sq,
    laplacian,
    sup_norm,
)

SQRT2 = float(np.sqrt(2.0))
SQRT8 = float(np.sqrt(8.0))


def shifted_potential(V: Potential) -> RealField:
    """V_delta = Vplus - Vminus + delta^2, certified inside [0, 2 lambda^2]."""
    vals = V.vplus.values - V.vminus.values + V.delta**2
    if vals.min() < 0.0 or vals.max() > 2.0 * V.lam**2:
        raise ValueError(
            "hypothesis breach: shifted potential leaves [0, 2*lambda^2] "
            f"(range [{vals.min():.6g}, {vals.max():.6g}], lambda = {V.lam})"
        )
    return RealField(V.vplus.spec, vals)


@dataclass(frozen=True)
class MultiplierConfig:
    tol: float = 1e-8
    max_sweeps: int = 200


@dataclass(frozen=True)
class Multiplier:
    phi: RealField
    log_phi: RealField
    lam: float
    delta: float
    iterations: int
    bounds_certificate: dict


def subsolution(spec: GridSpec, lam: float) -> RealField:
    """exp(sqrt(2) lambda x), an exact solution of Delta phi = 2 lambda^2 phi."""
    X, _ = spec.meshes()
    return RealField(spec, np.exp(SQRT2 * lam * X))


def supersolution_value(lam: float) -> float:
    return float(np.exp(SQRT8 * lam))


def build_multiplier(
    V_delta: RealField,
    lam: float,
    boundary=None,
    cfg: MultiplierConfig = MultiplierConfig(),
    delta: float = 0.0,
) -> Multiplier:
    """Monotone iteration for Delta phi = V_delta phi, phi > 0.

    boundary defaults to the constant supersolution; a custom callable or
    RealField supplies the Dirichlet ring instead. Fails loudly when the
    iterate ordering or the subsolution bracket is lost, which on these
    smooth inputs only happens if the grid is too coarse.
    """
    spec = V_delta.spec
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if spec.half_side > 2.0 + 1e-12:
        raise ValueError(
            "footprint too large: the exponential brackets only order on "
            f"half-sides <= 2, got {spec.half_side}"
        )
    vd = V_delta.values
    if vd.min() < 0.0 or vd.max() > 2.0 * lam**2 + 1e-12:
        raise ValueError(
            "hypothesis breach: V_delta must lie in [0, 2*lambda^2], got "
            f"[{vd.min():.6g}, {vd.max():.6g}]"
        )

    top = supersolution_value(lam)
    if boundary is None:
        gvals = np.full((spec.n, spec.n), top)
    else:
        gvals = _coerce_grid_values(spec, boundary, "boundary")

    shift = 2.0 * lam**2
    solver = CachedDirichletSolver(spec, np.full((spec.n, spec.n), shift))
    phi = np.full((spec.n, spec.n), top)
    phi[0, :] = gvals[0, :]
    phi[-1, :] = gvals[-1, :]
    phi[:, 0] = gvals[:, 0]
    phi[:, -1] = gvals[:, -1]

    monotone = True
    iterations = 0
    for iterations in range(1, cfg.max_sweeps + 1):
        rhs = (shift - vd) * phi
        nxt = solver.solve(gvals, rhs[1:-1, 1:-1])
        step = np.max(nxt - phi)
        scale = np.max(np.abs(phi))
        if step > 10.0 * cfg.tol * scale:
            raise RuntimeError(
                "monotonicity lost: iterate rose by "
                f"{step:.3e} (tolerance {10 * cfg.tol * scale:.3e}); "
                "the grid is too coarse for this potential"
            )
        if step > cfg.tol * scale:
            monotone = False
        done = np.max(np.abs(nxt - phi)) <= cfg.tol * scale
        phi = nxt
        if done:
            break
    else:
        raise RuntimeError(f"no convergence within {cfg.max_sweeps} sweeps")

    if phi.min() <= 0.0:
        raise RuntimeError("positivity lost in the multiplier iteration")

    log_phi = np.log(phi)
    X, _ = spec.meshes()
    lower_margin = float(np.min(log_phi - SQRT2 * lam * X))
    upper_margin = float(np.max(log_phi) - SQRT8 * lam)
    slack = 100.0 * spec.h**2 * lam**2 + 10.0 * cfg.tol
    if lower_margin < -slack:
        raise RuntimeError(
            f"subsolution bracket breached: log phi dips {-lower_margin:.3e} "
            f"below sqrt(2) lambda x (slack {slack:.3e})"
        )

    # converged fixed point should satisfy the discrete equation itself
    h2 = spec.h**2
    lap = (
        phi[:-2, 1:-1] + phi[2:, 1:-1] + phi[1:-1, :-2] + phi[1:-1, 2:]
        - 4.0 * phi[1:-1, 1:-1]
    ) / h2
    residual = np.max(np.abs(lap - vd[1:-1, 1:-1] * phi[1:-1, 1:-1]))
    residual_rel = float(residual / (shift * np.max(phi)))

    cert = {
        "lam": float(lam),
        "delta": float(delta),
        "iterations": iterations,
        "tol": cfg.tol,
        "monotone": monotone,
        "residual_rel": residual_rel,
        "lower_margin_log": lower_margin,
        "upper_margin_log": upper_margin,
        "lower_bound_ok": lower_margin >= -slack,
        "upper_bound_ok": upper_margin <= slack,
        "inf_log_phi": float(log_phi.min()),
        "sup_log_phi": float(log_phi.max()),
    }
    return Multiplier(
        RealField(spec, phi), RealField(spec, log_phi), lam, delta, iterations, cert
    )


def log_gradient_bound(m: Multiplier, F_lambda: float) -> float:
    """Empirical C2: sup over Q_d of |grad log phi| / lambda, d = 1 + 1/(2F)."""
    d = 1.0 + 1.0 / (2.0 * F_lambda)
    if d > m.phi.spec.half_side + 1e-12:
        raise ValueError(
            f"footprint half-side {m.phi.spec.half_side} does not cover Q_{d:g}"
        )
    gx, gy = gradient(m.log_phi)
    mag = RealField(m.phi.spec, np.hypot(gx.values, gy.values))
    return sup_norm(mag, Cube(0j, d)) / m.lam


def caccioppoli_check(m: Multiplier, z: complex, r: float, C_norm: float) -> float:
    """Normalized gradient energy over a ball, divided by r^2."""
    spec = m.phi.spec
    if max(abs(z.real), abs(z.imag)) + r > spec.half_side + 1e-12:
        raise ValueError("ball leaves the footprint")
    gx, gy = gradient(m.log_phi)
    mag = RealField(spec, np.hypot(gx.values, gy.values) / (C_norm * m.lam))
    return l2_sq(mag, Ball(z, r)) / r**2


def gradient_estimate_check(f: RealField, r: float, alpha: float, lam: float = 1.0) -> float:
    """Interior gradient estimate ratio r sup|grad f| / (lambda^2 sup f).

    The numerator sup runs over B_r, the denominator over the larger B_{alpha r};
    the ratio is the empirical C_alpha of the estimate.
    """
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if alpha * r > f.spec.half_side + 1e-12:
        raise ValueError("outer ball leaves the footprint")
    gx, gy = gradient(f)
    mag = RealField(f.spec, np.hypot(gx.values, gy.values))
    denom = lam**2 * sup_norm(f, Ball(0j, alpha * r))
    if denom == 0.0:
        raise ValueError("f vanishes on the outer ball")
    return r * sup_norm(mag, Ball(0j, r)) / denom
