"""Potentials and the discrete Dirichlet solver.

The solver works on the cell-centered grid of the field module: the outermost
ring of cells carries the boundary data and the 5-point operator
``-lap_h + V`` is inverted on the remaining interior cells by conjugate
gradients (unpreconditioned first, Jacobi-preconditioned retry). The system
is positive definite whenever ``inf V`` exceeds minus the first Dirichlet
eigenvalue of the discrete Laplacian, which is available in closed form on a
uniform square grid, so the precondition is checked exactly rather than
estimated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .field import GridSpec, RealField, bilinear_sample, field_from_function


@dataclass(frozen=True)
class Potential:
    """Split potential V = vplus - vminus with its generation parameters."""

    vplus: RealField
    vminus: RealField
    lam: float
    delta: float
    seed: int
    mode: str = "local"

    def combined(self) -> RealField:
        return RealField(self.vplus.spec, self.vplus.values - self.vminus.values)


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-10
    max_iter: int | None = None


def _random_trig(rng: np.random.Generator, spec: GridSpec, modes: int) -> np.ndarray:
    """Sum of a few low-frequency plane waves over the footprint."""
    X, Y = spec.meshes()
    L = 2.0 * spec.half_side
    out = np.zeros_like(X)
    for _ in range(modes):
        kx, ky = rng.integers(-3, 4, size=2)
        amp = rng.normal()
        phase = rng.uniform(0, 2 * np.pi)
        out += amp * np.cos(2 * np.pi * (kx * X + ky * Y) / L + phase)
    return out


def _rescale_clip(raw: np.ndarray, top: float) -> np.ndarray:
    lo, hi = raw.min(), raw.max()
    if hi - lo < 1e-300 or top == 0.0:
        return np.zeros_like(raw)
    return np.clip((raw - lo) / (hi - lo) * top, 0.0, top)


def gen_potential(
    seed: int,
    lam: float,
    delta: float,
    spec: GridSpec,
    mode: str = "local",
    c0: float = 1.0,
    eps0: float = 1.0,
) -> Potential:
    """Random smooth potential pair with sup vplus <= lam^2, sup vminus <= delta^2.

    ``mode="global"`` additionally damps vminus by exp(-c0 |z|^(1 + eps0)),
    the decay profile the global statement of the problem assumes.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if mode not in ("local", "global"):
        raise ValueError(f"unknown mode {mode!r}")
    rng_plus = np.random.default_rng([seed, 0xA])
    rng_minus = np.random.default_rng([seed, 0xB])
    vplus = _rescale_clip(_random_trig(rng_plus, spec, 8), lam**2)
    vminus = _rescale_clip(_random_trig(rng_minus, spec, 8), delta**2)
    if mode == "global":
        X, Y = spec.meshes()
        r = np.hypot(X, Y)
        vminus = vminus * np.exp(-c0 * r ** (1.0 + eps0))
    return Potential(
        RealField(spec, vplus), RealField(spec, vminus), lam, delta, seed, mode
    )


def dirichlet_mu1(spec: GridSpec) -> float:
    """First eigenvalue of the 5-point Dirichlet Laplacian on the interior cells."""
    m = spec.n - 2
    return 2.0 * (4.0 / spec.h**2) * np.sin(np.pi / (2 * (m + 1))) ** 2


def _coerce_grid_values(spec: GridSpec, data, name: str) -> np.ndarray:
    if data is None:
        return np.zeros((spec.n, spec.n))
    if isinstance(data, RealField):
        if not data.spec.same_geometry(spec):
            raise ValueError(f"{name} lives on a different grid")
        return data.values
    if callable(data):
        X, Y = spec.meshes()
        return np.broadcast_to(np.asarray(data(X, Y), dtype=float), X.shape).copy()
    raise TypeError(f"{name} must be a RealField, a callable, or None")


def _interior_system(spec: GridSpec, vvals: np.ndarray):
    m = spec.n - 2
    h2 = spec.h**2
    one_d = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(m, m)) / h2
    eye = sp.identity(m)
    lap = sp.kron(eye, one_d) + sp.kron(one_d, eye)
    return (lap + sp.diags(vvals[1:-1, 1:-1].ravel())).tocsr()


def _boundary_load(spec: GridSpec, gvals: np.ndarray) -> np.ndarray:
    """Ring contribution to the interior right-hand side, as an (m, m) array."""
    h2 = spec.h**2
    ring = gvals.copy()
    ring[1:-1, 1:-1] = 0.0
    load = (
        ring[:-2, 1:-1] + ring[2:, 1:-1] + ring[1:-1, :-2] + ring[1:-1, 2:]
    ) / h2
    return load


def apply_operator(V: RealField | Potential, u: RealField, f=None) -> RealField:
    """Interior residual (-lap_h u + V u - f); the boundary ring is zeroed.

    This is the oracle the solver is tested against: it re-applies the same
    compact stencil to a candidate solution.
    """
    vvals = V.combined().values if isinstance(V, Potential) else V.values
    spec = u.spec
    h2 = spec.h**2
    uv = u.values
    res = np.zeros_like(uv)
    res[1:-1, 1:-1] = (
        4.0 * uv[1:-1, 1:-1]
        - uv[:-2, 1:-1]
        - uv[2:, 1:-1]
        - uv[1:-1, :-2]
        - uv[1:-1, 2:]
    ) / h2 + vvals[1:-1, 1:-1] * uv[1:-1, 1:-1]
    res[1:-1, 1:-1] -= _coerce_grid_values(spec, f, "f")[1:-1, 1:-1]
    return RealField(spec, res)


def solve_dirichlet(
    V: RealField | Potential,
    g,
    f=None,
    cfg: SolveConfig = SolveConfig(),
) -> RealField:
    """Solve -lap_h u + V u = f with u = g on the boundary ring.

    g and f may be callables of (x, y) or fields on the same grid. Raises if
    the shifted operator is indefinite (inf V <= -mu1) or if CG stalls.
    """
    vfield = V.combined() if isinstance(V, Potential) else V
    spec = vfield.spec
    vvals = vfield.values
    mu1 = dirichlet_mu1(spec)
    if vvals.min() <= -mu1:
        raise ValueError(
            f"indefinite system: inf V = {vvals.min():.6g} <= -mu1 = {-mu1:.6g}"
        )
    gvals = _coerce_grid_values(spec, g, "g")
    fvals = _coerce_grid_values(spec, f, "f")

    A = _interior_system(spec, vvals)
    b = (fvals[1:-1, 1:-1] + _boundary_load(spec, gvals)).ravel()

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros_like(b)
    else:
        maxiter = cfg.max_iter or 40 * spec.n
        x, info = spla.cg(A, b, rtol=cfg.tol, atol=0.0, maxiter=maxiter)
        if info != 0:
            # Jacobi-preconditioned retry before giving up.
            M = sp.diags(1.0 / A.diagonal())
            x, info = spla.cg(A, b, rtol=cfg.tol, atol=0.0, maxiter=maxiter, M=M)
        if info != 0:
            rel = np.linalg.norm(b - A @ x) / bnorm
            raise RuntimeError(
                f"conjugate gradients stalled: relative residual {rel:.3e} "
                f"after {maxiter} iterations"
            )

    u = gvals.copy()
    u[1:-1, 1:-1] = x.reshape(spec.n - 2, spec.n - 2)
    return RealField(spec, u)


class CachedDirichletSolver:
    """Repeated solves against one fixed potential on one grid.

    The sparse factorization is computed once; subsequent right-hand sides
    are back-substitutions. Same stencil and unknowns as solve_dirichlet, so
    the two agree to solver tolerance.
    """

    def __init__(self, spec: GridSpec, vvals: np.ndarray):
        mu1 = dirichlet_mu1(spec)
        if vvals.min() <= -mu1:
            raise ValueError(
                f"indefinite system: inf V = {vvals.min():.6g} <= -mu1 = {-mu1:.6g}"
            )
        self.spec = spec
        self._solve = spla.factorized(_interior_system(spec, vvals).tocsc())

    def solve(self, gvals: np.ndarray, fvals_interior: np.ndarray) -> np.ndarray:
        b = (fvals_interior + _boundary_load(self.spec, gvals)).ravel()
        u = gvals.copy()
        n = self.spec.n
        u[1:-1, 1:-1] = self._solve(b).reshape(n - 2, n - 2)
        return u


def rescale(
    u: RealField,
    V: RealField,
    z1: complex,
    T: float,
    target_spec: GridSpec | None = None,
) -> tuple[RealField, RealField]:
    """Recentre and rescale a solution: u~(z) = u(z1 + T z), V~ = T^2 V(z1 + T z).

    If u solves -lap u + V u = 0 then u~ solves the same equation with V~.
    The default target keeps the cell count and shrinks the footprint by T.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if not u.spec.same_geometry(V.spec):
        raise ValueError("u and V live on different grids")
    if target_spec is None:
        target_spec = GridSpec(0j, u.spec.half_side / T, u.spec.n)
    pts = z1 + T * target_spec.points()
    try:
        uvals = bilinear_sample(u, pts)
        vvals = bilinear_sample(V, pts)
    except ValueError as exc:
        raise ValueError(f"footprint exceeded: {exc}") from exc
    return (
        RealField(target_spec, uvals.real),
        RealField(target_spec, T**2 * vvals.real),
    )


def random_boundary_trace(seed: int, lam: float = 1.0, modes: int = 5):
    """Low-frequency trigonometric boundary data with a fixed offset.

    The offset keeps the solution away from an accidental zero at the origin,
    which the normalization |u(0)| >= 1 of the experiments relies on.
    """
    rng = np.random.default_rng([seed, 0xC])
    ks = rng.integers(-2, 3, size=(modes, 2))
    amps = rng.normal(size=modes)
    phases = rng.uniform(0, 2 * np.pi, size=modes)

    def g(x, y):
        out = np.ones_like(np.asarray(x, dtype=float))
        for (kx, ky), a, p in zip(ks, amps, phases):
            out = out + a * np.cos(kx * x + ky * y + p) / modes
        return out

    return g
