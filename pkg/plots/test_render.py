"""Renderer contract against the frozen fixture CSVs."""

import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from render import FigureSpec, render, spec_from_dict

HERE = Path(__file__).parent
FIX = HERE / "fixtures"


def fixture_for(kind):
    return {
        "theta_vs_lambda": FIX / "threeball.csv",
        "impliedC_vs_lambda": FIX / "threeball.csv",
        "vanishing_slope": FIX / "vanishing.csv",
        "alpha_trajectory": FIX / "landis.csv",
        "kernel_mass_scaling": FIX / "kernel_mass.csv",
    }[kind]


class TestRender:
    @pytest.mark.parametrize("kind", [
        "theta_vs_lambda", "impliedC_vs_lambda", "vanishing_slope",
        "alpha_trajectory", "kernel_mass_scaling",
    ])
    def test_all_kinds_produce_nonzero_png(self, kind, tmp_path):
        out = render(FigureSpec(str(fixture_for(kind)), kind,
                                str(tmp_path / f"{kind}.png")))
        assert out.exists() and out.stat().st_size > 0

    def test_svg_output(self, tmp_path):
        out = render(FigureSpec(str(FIX / "threeball.csv"), "theta_vs_lambda",
                                str(tmp_path / "fig.svg")))
        assert out.stat().st_size > 0
        assert out.read_text().lstrip().startswith("<?xml")

    def test_idempotent_and_input_untouched(self, tmp_path):
        src = FIX / "kernel_mass.csv"
        before = src.read_bytes()
        spec = FigureSpec(str(src), "kernel_mass_scaling",
                          str(tmp_path / "fig.png"))
        first = render(spec).read_bytes()
        second = render(spec).read_bytes()
        assert first == second
        assert src.read_bytes() == before

    def test_missing_column_named(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("lam,seed\n1.5,0\n")
        with pytest.raises(ValueError, match="missing column 'theta'"):
            render(FigureSpec(str(bad), "theta_vs_lambda",
                              str(tmp_path / "fig.png")))

    def test_unknown_kind_and_bad_extension(self, tmp_path):
        with pytest.raises(ValueError, match="unknown kind"):
            render(FigureSpec(str(FIX / "threeball.csv"), "pie_chart",
                              str(tmp_path / "fig.png")))
        with pytest.raises(ValueError, match="png or .svg"):
            render(FigureSpec(str(FIX / "threeball.csv"), "theta_vs_lambda",
                              str(tmp_path / "fig.pdf")))


class TestAlphaTrajectoryFixture:
    def test_monotone_decreasing_crossing_at_43(self, tmp_path):
        with open(FIX / "landis.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        alphas = [float(r["alpha_n"]) for r in rows]
        assert all(b < a for a, b in zip(alphas, alphas[1:]))
        threshold = 1.0 / 0.9  # stopping level of the fixture schedule
        crossing = next(int(r["n"]) for r in rows
                        if float(r["alpha_n"]) <= threshold)
        assert crossing == 43
        out = render(FigureSpec(str(FIX / "landis.csv"), "alpha_trajectory",
                                str(tmp_path / "alpha.png"),
                                reference=threshold))
        assert out.stat().st_size > 0


class TestKernelMassFixture:
    def test_points_inside_reference_band(self):
        with open(FIX / "kernel_mass.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            assert float(r["band_lo"]) <= float(r["mass"]) <= float(r["band_hi"])


class TestCli:
    def test_single_spec_file(self, tmp_path):
        spec = {"input": str(FIX / "threeball.csv"),
                "kind": "impliedC_vs_lambda",
                "output": str(tmp_path / "c.png")}
        sfile = tmp_path / "spec.json"
        sfile.write_text(json.dumps(spec))
        proc = subprocess.run(
            [sys.executable, str(HERE / "render.py"), "--spec", str(sfile)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "c.png").stat().st_size > 0

    def test_batch_and_error_paths(self, tmp_path):
        specs = [
            {"input": str(FIX / "landis.csv"), "kind": "alpha_trajectory",
             "output": str(tmp_path / "a.png"), "reference": 1.0 / 0.9},
            {"input": str(FIX / "vanishing.csv"), "kind": "vanishing_slope",
             "output": str(tmp_path / "v.svg")},
        ]
        sfile = tmp_path / "batch.json"
        sfile.write_text(json.dumps(specs))
        proc = subprocess.run(
            [sys.executable, str(HERE / "render.py"), "--spec", str(sfile)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "a.png").exists() and (tmp_path / "v.svg").exists()

        bad = {"input": str(FIX / "landis.csv"), "kind": "theta_vs_lambda",
               "output": str(tmp_path / "x.png")}
        sfile.write_text(json.dumps(bad))
        proc = subprocess.run(
            [sys.executable, str(HERE / "render.py"), "--spec", str(sfile)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        assert "missing column" in proc.stderr

    def test_spec_key_validation(self):
        with pytest.raises(ValueError, match="unknown FigureSpec keys"):
            spec_from_dict({"input": "a.csv", "kind": "theta_vs_lambda",
                            "output": "o.png", "dpi": 300})
        with pytest.raises(ValueError, match="needs 'output'"):
            spec_from_dict({"input": "a.csv", "kind": "theta_vs_lambda"})
