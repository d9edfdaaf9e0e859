"""Experiment orchestration: configs, instance chains, run persistence.

A run executes gen -> solve -> multiplier -> stream -> beltrami -> experiment
for each (lambda, seed, n) and writes everything under one directory:
CSV tables with a fixed column order, UCPF field files, per-instance
certificates, and a manifest.  Re-running the same config reproduces the
CSV and field files byte for byte; only the manifest timestamp moves.

The small-potential envelope delta = c0 sqrt(lam)/log(lam) * exp(-m lam)
needs the measured constant m = 2 c_inf C3, and C3 is measured from the
multiplier, which itself needs delta.  The circle is broken with a cheap
calibration pass: build a multiplier at a provisional delta on a coarse
grid, measure C3 there (the constant is insensitive to both choices), then
run the real chain at the calibrated delta.  Both passes land in the
instance certificate.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .cauchy import CauchyOp, c_infty_estimate, disk_mask, kernel_mass
from .elliptic import gen_potential, random_boundary_trace, solve_dirichlet
from .field import GridSpec, RealField, write_field
from .interpolation import ball_sup, three_ball_experiment, vanishing_order_experiment
from .landis import run_schedule, schedule_rows
from .multiplier import build_multiplier, log_gradient_bound, shifted_potential
from .similarity import bound_sweep, global_solve
from .stream import RESIDUAL_KINDS, assemble_G, build_stream, residuals, tilde_w

KINDS = ("gen", "solve", "multiplier", "stream", "beltrami",
         "threeball", "vanishing", "beltrami_sweep", "landis")

# how far down the chain each kind runs; experiments imply the full chain
_STAGE_CUT = {
    "gen": 1,
    "solve": 2,
    "multiplier": 3,
    "stream": 4,
    "beltrami": 5,
    "threeball": 6,
    "vanishing": 6,
}

F_MODES = ("one", "sqrt", "linear", "all")

CSV_COLUMNS = {
    "threeball": [
        "lam", "seed", "n", "F", "r", "delta", "theta",
        "norm_u_B1", "norm_u_Br", "norm_u_Bb",
        "implied_C", "implied_C_over_lam",
        "norm_w1t_Bd", "norm_w2t_Brhalf", "implied_C_w1", "implied_C_w2",
        "beltrami_method", "beltrami_residual",
    ],
    "vanishing": [
        "lam", "seed", "n", "F", "delta",
        "fitted_exponent", "C_hat", "bound_exponent", "min_radius_cells",
    ],
    "vanishing_curves": ["lam", "seed", "n", "F", "r", "log_norm"],
    "stream_residuals": ["lam", "seed", "n", "delta"] + [f"res_{k}" for k in RESIDUAL_KINDS],
    "beltrami_sweep": ["M", "seed", "norm_sum", "log_norm_sum", "ratio"],
    "landis": ["n", "S_n", "alpha_n", "ratio", "admissible"],
    "kernel_mass": ["R", "mass", "per_R", "band_lo", "band_hi"],
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameter record for one pipeline run."""

    kind: str
    lambda_list: tuple = (1.5, 2.0)
    seed_list: tuple = (0, 1, 2)
    n_list: tuple = (128,)
    F_mode: str = "one"
    delta_mode: str = "prescribed"  # or a float override
    delta_override: float | None = None
    r: float = 0.25
    r_grid: tuple | None = None
    c0: float = 0.5
    half_side: float = 2.0
    C1: float = 3.0
    c1: float = 4.0
    p: float = 1.0
    beltrami_tol: float = 1e-8
    landis: dict = dc_field(default_factory=dict)
    sweep: dict = dc_field(default_factory=dict)

    def F_values(self, lam: float) -> list[float]:
        table = {"one": [1.0], "sqrt": [float(np.sqrt(lam))], "linear": [lam]}
        if self.F_mode == "all":
            return table["one"] + table["sqrt"] + table["linear"]
        return table[self.F_mode]

    def delta_for(self, lam: float, m_hat: float) -> float:
        if self.delta_mode == "override":
            return float(self.delta_override)
        return prescribed_delta(lam, m_hat, self.c0)


def prescribed_delta(lam: float, m_hat: float, c0: float) -> float:
    """c0 sqrt(lam)/log(lam) * exp(-m_hat lam), the decaying envelope scale."""
    if lam <= 1.0:
        raise ValueError(
            f"prescribed delta needs lam > 1 (log lam in the denominator), got {lam}"
        )
    return float(c0 * np.sqrt(lam) / np.log(lam) * np.exp(-m_hat * lam))


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build and validate a config from parsed JSON."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}, expected one of {KINDS}")
    dm = d.pop("delta_mode", "prescribed")
    override = None
    if isinstance(dm, dict):
        if set(dm) != {"override"}:
            raise ValueError(f"delta_mode object must be {{'override': value}}, got {dm}")
        override = float(dm["override"])
        dm = "override"
    elif isinstance(dm, (int, float)):
        override = float(dm)
        dm = "override"
    elif dm != "prescribed":
        raise ValueError(f"delta_mode must be 'prescribed' or an override, got {dm!r}")
    known = {
        "lambda_list", "seed_list", "n_list", "F_mode", "r", "r_grid", "c0",
        "half_side", "C1", "c1", "p", "beltrami_tol", "landis", "sweep",
    }
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    for key in ("lambda_list", "seed_list", "n_list", "r_grid"):
        if key in d and d[key] is not None:
            d[key] = tuple(d[key])
    cfg = ExperimentConfig(kind=kind, delta_mode=dm, delta_override=override, **d)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.F_mode not in F_MODES:
        raise ValueError(f"unknown F_mode {cfg.F_mode!r}, expected one of {F_MODES}")
    if any(lam <= 0 for lam in cfg.lambda_list):
        raise ValueError("lambda_list entries must be positive")
    if cfg.delta_mode == "prescribed" and any(lam <= 1.0 for lam in cfg.lambda_list):
        raise ValueError(
            "delta_mode 'prescribed' needs every lambda > 1; "
            "use an override for small lambda"
        )
    if cfg.delta_mode == "override" and not cfg.delta_override > 0:
        raise ValueError(f"delta override must be positive, got {cfg.delta_override}")
    if any(int(n) != n or n < 8 for n in cfg.n_list):
        raise ValueError("n_list entries must be integers >= 8")
    if any(int(s) != s or s < 0 for s in cfg.seed_list):
        raise ValueError("seed_list entries must be nonnegative integers")
    if not 0 < cfg.r < 1:
        raise ValueError(f"r must lie in (0, 1), got {cfg.r}")
    if cfg.r_grid is not None:
        rg = list(cfg.r_grid)
        if len(rg) < 2 or any(r <= 0 for r in rg) or any(
                b >= a for a, b in zip(rg, rg[1:])):
            raise ValueError("r_grid must be a decreasing list of positive radii")
    if cfg.half_side > 2.0:
        raise ValueError(
            f"half_side must stay <= 2 for the multiplier bracket, got {cfg.half_side}"
        )


def canonical_config(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))


def run_id_for(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_config(cfg).encode()).hexdigest()[:12]


def runs_root(out: str | None = None) -> Path:
    if out is not None:
        return Path(out)
    return Path(os.environ.get("UCPLAB_RUNS", "runs"))


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.17g}"


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def read_csv(path) -> list[dict]:
    """Header-checked reader for the fixed-order tables this module writes."""
    lines = Path(path).read_text().strip().split("\n")
    columns = lines[0].split(",")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(columns):
            raise ValueError(f"malformed CSV row in {path}: {line!r}")
        out.append(dict(zip(columns, parts)))
    return out


class _OpCache:
    """One CauchyOp per grid, built lazily under a lock for threaded runs."""

    def __init__(self):
        self._ops: dict[tuple, CauchyOp] = {}
        self._lock = threading.Lock()

    def get(self, spec: GridSpec) -> CauchyOp:
        key = (spec.center, spec.half_side, spec.n)
        with self._lock:
            if key not in self._ops:
                self._ops[key] = CauchyOp.from_spec(spec)
            return self._ops[key]


@dataclass
class InstanceResult:
    lam: float
    seed: int
    n: int
    status: str = "ok"
    error: str = ""
    rows: dict = dc_field(default_factory=dict)
    certificates: dict = dc_field(default_factory=dict)
    fields: dict = dc_field(default_factory=dict)

    @property
    def tag(self) -> str:
        return f"lam{self.lam:g}_seed{self.seed}_n{self.n}"


def _calibrate(cfg: ExperimentConfig, lam: float, seed: int, coarse_n: int = 64):
    """Measure m_hat = 2 c_inf C3 from a provisional multiplier."""
    spec = GridSpec(0j, cfg.half_side, coarse_n)
    delta_cal = float(np.exp(-lam))
    pot = gen_potential(seed, lam, delta_cal, spec)
    m = build_multiplier(shifted_potential(pot), lam, delta=delta_cal)
    C3_hat = log_gradient_bound(m, 1.0)
    c_inf = _c_inf_cached()
    m_hat = 2.0 * c_inf * C3_hat
    return m_hat, {"c_inf": c_inf, "C3_hat": C3_hat, "m_hat": m_hat,
                   "delta_cal": delta_cal, "coarse_n": coarse_n}


_C_INF_LOCK = threading.Lock()
_C_INF_VALUE: list[float] = []


def _c_inf_cached() -> float:
    with _C_INF_LOCK:
        if not _C_INF_VALUE:
            _C_INF_VALUE.append(c_infty_estimate(24))
        return _C_INF_VALUE[0]


def run_instance(cfg: ExperimentConfig, lam: float, seed: int, n: int,
                 ops: _OpCache) -> InstanceResult:
    """Execute the chain for one (lambda, seed, n) up to the kind's cut."""
    res = InstanceResult(lam=lam, seed=seed, n=int(n))
    cut = _STAGE_CUT[cfg.kind]
    try:
        spec = GridSpec(0j, cfg.half_side, int(n))
        if cfg.delta_mode == "prescribed":
            m_hat, calib = _calibrate(cfg, lam, seed)
        else:
            m_hat, calib = 0.0, {"delta_override": cfg.delta_override}
        delta = cfg.delta_for(lam, m_hat)
        calib["delta"] = delta
        res.certificates["calibration"] = calib

        pot = gen_potential(seed, lam, delta, spec)
        res.fields["vplus"] = pot.vplus
        res.fields["vminus"] = pot.vminus
        if cut < 2:
            return res

        u = solve_dirichlet(pot, random_boundary_trace(seed, lam))
        scale = ball_sup(u, 1.0)
        if scale <= 0:
            raise ValueError("solution degenerate on the unit ball")
        u = RealField(spec, u.values / scale)
        res.fields["u"] = u
        if cut < 3:
            return res

        m = build_multiplier(shifted_potential(pot), lam, delta=delta)
        res.fields["phi"] = m.phi
        res.certificates["multiplier"] = m.bounds_certificate
        if cut < 4:
            return res

        s = build_stream(u, m, delta)
        T_op = ops.get(spec)
        tilde_w(s, T_op)
        G = assemble_G(s, T_op)
        res.rows["stream_residuals"] = [{
            "lam": lam, "seed": seed, "n": n, "delta": delta,
            **{f"res_{k}": residuals(s, k) for k in RESIDUAL_KINDS},
        }]
        if cut < 5:
            return res

        sol = global_solve(G, T_op)
        res.certificates["beltrami"] = sol.certificates
        if cut < 6:
            return res

        if cfg.kind == "threeball":
            rows = []
            for F in cfg.F_values(lam):
                rec = three_ball_experiment(u, m, s, sol, cfg.r, F)
                rows.append({
                    "lam": lam, "seed": seed, "n": n, "F": F, "r": cfg.r,
                    "delta": delta, "theta": rec.theta,
                    "norm_u_B1": rec.norm_u_B1, "norm_u_Br": rec.norm_u_Br,
                    "norm_u_Bb": rec.norm_u_Bb, "implied_C": rec.implied_C,
                    "implied_C_over_lam": rec.implied_C / lam,
                    "norm_w1t_Bd": rec.norm_w1t_Bd,
                    "norm_w2t_Brhalf": rec.norm_w2t_Brhalf,
                    "implied_C_w1": rec.implied_C_w1,
                    "implied_C_w2": rec.implied_C_w2,
                    "beltrami_method": sol.certificates.get("method", ""),
                    "beltrami_residual": sol.certificates.get("residual"),
                })
            res.rows["threeball"] = rows
        elif cfg.kind == "vanishing":
            rows, curves = [], []
            rg = None if cfg.r_grid is None else np.asarray(cfg.r_grid, dtype=float)
            for F in cfg.F_values(lam):
                rec = vanishing_order_experiment(
                    u, lam, F, r_grid=rg, C1=cfg.C1, c1=cfg.c1, p=cfg.p)
                rows.append({
                    "lam": lam, "seed": seed, "n": n, "F": F, "delta": delta,
                    "fitted_exponent": rec.fitted_exponent, "C_hat": rec.C_hat,
                    "bound_exponent": rec.bound_exponent,
                    "min_radius_cells": rec.min_radius_cells,
                })
                curves.extend(
                    {"lam": lam, "seed": seed, "n": n, "F": F,
                     "r": r, "log_norm": ln}
                    for r, ln in zip(rec.r_grid, rec.log_norms)
                )
            res.rows["vanishing"] = rows
            res.rows["vanishing_curves"] = curves
    except Exception as exc:  # noqa: BLE001 - instance failures are data
        res.status = "error"
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def kernel_mass_rows(half_side: float = 1.0, n: int = 96,
                     radii=(0.2, 0.3, 0.45, 0.65, 0.9)) -> list[dict]:
    """Kernel mass over centered disks against the linear reference 2 pi R."""
    patch = CauchyOp.from_spec(GridSpec(0j, half_side, n)).patch
    rows = []
    for R in radii:
        # kernel_mass only honours the mask when handed a bare patch: a
        # prebuilt CauchyOp carries its own domain and the argument is ignored.
        mass = kernel_mass(patch, disk_mask(patch, 0j, R))
        ref = 2.0 * np.pi * R
        rows.append({"R": R, "mass": mass, "per_R": mass / R,
                     "band_lo": ref / 2.0, "band_hi": ref * 2.0})
    return rows


def run_pipeline(cfg: ExperimentConfig, out: str | None = None,
                 threads: int = 1, command: str = "") -> Path:
    """Execute a config and persist the run directory; returns its path."""
    run_dir = runs_root(out) / run_id_for(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)

    tables: dict[str, list[dict]] = {}
    instance_status: list[dict] = []

    if cfg.kind == "landis":
        kw = dict(cfg.landis)
        eps = kw.pop("eps", 0.2)
        eps0 = kw.pop("eps0", 1.0)
        S0 = kw.pop("S0", 100.0)
        sched = run_schedule(eps, eps0, S0, **kw)
        tables["landis"] = schedule_rows(sched)
        cert = {k: v for k, v in sched.certificates.items()}
        cert.update({"N": sched.N, "alpha0": sched.alpha0, "eps1": sched.eps1,
                     "final_exponent": sched.final_exponent})
        (run_dir / "landis_certificate.json").write_text(
            json.dumps(cert, indent=1, sort_keys=True, default=float))
    elif cfg.kind == "beltrami_sweep":
        kw = dict(cfg.sweep)
        rows = bound_sweep(
            M_values=tuple(kw.get("M_values", (2.0, 4.0, 8.0))),
            seeds=tuple(kw.get("seeds", (0, 1, 2))),
            n=int(kw.get("n", 64)),
        )
        tables["beltrami_sweep"] = rows
    else:
        ops = _OpCache()
        jobs = [(lam, seed, n) for lam in cfg.lambda_list
                for seed in cfg.seed_list for n in cfg.n_list]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(
                    lambda j: run_instance(cfg, *j, ops), jobs))
        else:
            results = [run_instance(cfg, *job, ops) for job in jobs]
        for r in sorted(results, key=lambda r: (r.lam, r.seed, r.n)):
            inst_dir = run_dir / "instances" / r.tag
            inst_dir.mkdir(parents=True, exist_ok=True)
            for name, f in r.fields.items():
                write_field(inst_dir / f"{name}.ucpf", f)
            if r.certificates:
                (inst_dir / "certificates.json").write_text(
                    json.dumps(r.certificates, indent=1, sort_keys=True,
                               default=float))
            for table, rows in r.rows.items():
                tables.setdefault(table, []).extend(rows)
            instance_status.append({
                "instance": r.tag, "status": r.status, "error": r.error})

    for table, rows in tables.items():
        write_csv(run_dir / f"{table}.csv", rows, CSV_COLUMNS[table])

    digests = {}
    for p in sorted(run_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            digests[str(p.relative_to(run_dir))] = hashlib.sha256(
                p.read_bytes()).hexdigest()
    manifest = {
        "run_id": run_id_for(cfg),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "config": asdict(cfg),
        "seeds": list(cfg.seed_list),
        "grid_sizes": list(cfg.n_list),
        "instances": instance_status,
        "digests": digests,
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True))
    return run_dir
