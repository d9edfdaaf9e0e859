"""Static figures from the lab's CSV outputs.

One FigureSpec in, one image out. The renderers only read columns that the
batch CLI writes; a spec pointing at a CSV without the needed column fails
up front naming it, so a schema drift surfaces here and not as a blank
axis. Output format follows the file extension (png or svg) and rendering
is deterministic: same CSV bytes, same image bytes.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402 - backend must be pinned first

matplotlib.rcParams.update({
    "figure.dpi": 120,
    "svg.hashsalt": "ucplab-plots",
    "font.size": 9,
})


@dataclass(frozen=True)
class FigureSpec:
    input: str
    kind: str
    output: str
    reference: float | None = None  # optional horizontal guide line
    title: str | None = None


def load_rows(path: Path, columns: tuple[str, ...]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise ValueError(f"missing column {col!r} in {path}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return rows


def _floats(rows, col):
    return [float(r[col]) for r in rows]


def _draw_theta_vs_lambda(rows, ax, spec):
    pts = sorted({(float(r["lam"]), float(r["theta"])) for r in rows})
    ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-")
    ax.set_xlabel("lambda")
    ax.set_ylabel("theta")


def _draw_impliedC_vs_lambda(rows, ax, spec):
    ax.scatter(_floats(rows, "lam"), _floats(rows, "implied_C"), s=18)
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("lambda")
    ax.set_ylabel("implied C")


def _draw_vanishing_slope(rows, ax, spec):
    by_F = {}
    for r in rows:
        by_F.setdefault(float(r["F"]), []).append(
            (float(r["lam"]), float(r["fitted_exponent"]))
        )
    for F, pts in sorted(by_F.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o",
                label=f"F = {F:g}")
    ax.set_xlabel("lambda")
    ax.set_ylabel("fitted vanishing exponent")
    ax.legend()


def _draw_alpha_trajectory(rows, ax, spec):
    ns = [int(r["n"]) for r in rows]
    alphas = _floats(rows, "alpha_n")
    ax.plot(ns, alphas, "-", lw=1.2)
    ax.set_xlabel("n")
    ax.set_ylabel("alpha_n")


def _draw_kernel_mass_scaling(rows, ax, spec):
    R = _floats(rows, "R")
    ax.loglog(R, _floats(rows, "mass"), "o", label="measured")
    ax.loglog(R, _floats(rows, "band_lo"), "--", color="0.5", label="band")
    ax.loglog(R, _floats(rows, "band_hi"), "--", color="0.5")
    ax.set_xlabel("R")
    ax.set_ylabel("kernel mass")
    ax.legend()


KINDS = {
    "theta_vs_lambda": (("lam", "theta"), _draw_theta_vs_lambda),
    "impliedC_vs_lambda": (("lam", "implied_C"), _draw_impliedC_vs_lambda),
    "vanishing_slope": (("lam", "F", "fitted_exponent"), _draw_vanishing_slope),
    "alpha_trajectory": (("n", "alpha_n"), _draw_alpha_trajectory),
    "kernel_mass_scaling": (
        ("R", "mass", "band_lo", "band_hi"), _draw_kernel_mass_scaling,
    ),
}


def render(spec: FigureSpec) -> Path:
    if spec.kind not in KINDS:
        raise ValueError(
            f"unknown kind {spec.kind!r}; choose from {sorted(KINDS)}"
        )
    columns, draw = KINDS[spec.kind]
    rows = load_rows(Path(spec.input), columns)
    out = Path(spec.output)
    if out.suffix.lower() not in (".png", ".svg"):
        raise ValueError(f"output must be .png or .svg, got {out.name}")

    fig, ax = plt.subplots(figsize=(4.5, 3.2), layout="constrained")
    try:
        draw(rows, ax, spec)
        if spec.reference is not None:
            ax.axhline(spec.reference, color="tab:red", lw=0.9, ls=":")
        ax.set_title(spec.title or spec.kind.replace("_", " "))
        meta = {"Date": None} if out.suffix.lower() == ".svg" else None
        fig.savefig(out, metadata=meta)
    finally:
        plt.close(fig)
    return out


def spec_from_dict(d: dict) -> FigureSpec:
    known = {"input", "kind", "output", "reference", "title"}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown FigureSpec keys {sorted(extra)}")
    for key in ("input", "kind", "output"):
        if key not in d:
            raise ValueError(f"FigureSpec needs {key!r}")
    return FigureSpec(**d)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render figures from batch-run CSVs."
    )
    parser.add_argument("--spec", required=True,
                        help="JSON file: one FigureSpec or a list of them")
    args = parser.parse_args(argv)
    payload = json.loads(Path(args.spec).read_text())
    specs = payload if isinstance(payload, list) else [payload]
    try:
        for entry in specs:
            print(render(spec_from_dict(entry)))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
