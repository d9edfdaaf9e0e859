"""Command line front end: pipelines, verification, and run reports."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .pipeline import (
    CSV_COLUMNS,
    ExperimentConfig,
    config_from_dict,
    kernel_mass_rows,
    read_csv,
    run_pipeline,
    write_csv,
)
from .verify import run_verify

_PIPELINE_KINDS = (
    "gen", "solve", "multiplier", "stream", "beltrami",
    "threeball", "vanishing", "beltrami_sweep", "landis",
)


def _load_config(path: str | None, kind: str) -> ExperimentConfig:
    if path is None:
        return config_from_dict({"kind": kind})
    with open(path) as fh:
        raw = json.load(fh)
    raw["kind"] = kind  # subcommand wins over whatever the file says
    return config_from_dict(raw)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--out", help="runs root (default $UCPLAB_RUNS or ./runs)")
    sub.add_argument("--threads", type=int, default=1,
                     help="parallel (lambda, seed) instances")
    sub.add_argument("--seed", type=int, help="replace the config seed list")


def _report(run_dir: Path) -> dict:
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise SystemExit(f"not a run directory (no manifest.json): {run_dir}")
    manifest = json.loads(manifest_path.read_text())
    tables = {}
    for csv_path in sorted(run_dir.glob("*.csv")):
        rows = read_csv(csv_path)
        tables[csv_path.stem] = {"rows": len(rows),
                                 "columns": list(rows[0]) if rows else []}
    errors = [i for i in manifest.get("instances", []) if i["status"] != "ok"]
    write_csv(run_dir / "kernel_mass.csv", kernel_mass_rows(),
              CSV_COLUMNS["kernel_mass"])
    report = {
        "run_id": manifest["run_id"],
        "kind": manifest["config"]["kind"],
        "tables": tables,
        "instances": len(manifest.get("instances", [])),
        "errors": errors,
    }
    (run_dir / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True))
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ucplab",
        description="desk-scale numerical checks for the plane unique-"
                    "continuation pipeline",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for kind in _PIPELINE_KINDS:
        sub = subs.add_parser(kind, help=f"run the {kind} pipeline")
        _add_common(sub)

    vsub = subs.add_parser("verify", help="run invariant suites")
    vsub.add_argument("--suite", default="all")
    vsub.add_argument("--out", help="write the JSON report here as well")

    rsub = subs.add_parser("report", help="summarize a run directory")
    rsub.add_argument("--run", required=True, help="run directory path")

    args = parser.parse_args(argv)

    if args.command == "verify":
        report = run_verify(args.suite)
        text = json.dumps(report, indent=1, sort_keys=True)
        print(text)
        if args.out:
            Path(args.out).write_text(text)
        return 0 if report["ok"] else 1

    if args.command == "report":
        report = _report(Path(args.run))
        print(json.dumps(report, indent=1, sort_keys=True))
        return 1 if report["errors"] else 0

    cfg = _load_config(args.config, args.command)
    if args.seed is not None:
        cfg = replace(cfg, seed_list=(args.seed,))
    run_dir = run_pipeline(cfg, out=args.out, threads=args.threads,
                           command=" ".join(sys.argv[1:] if argv is None else argv))
    manifest = json.loads((run_dir / "manifest.json").read_text())
    failed = [i for i in manifest["instances"] if i["status"] != "ok"]
    print(run_dir)
    for inst in failed:
        print(f"  {inst['instance']}: {inst['error']}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
