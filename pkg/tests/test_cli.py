"""Command-line entry points, exercised in-process through main()."""

import json

import numpy as np
import pytest

from prefine import load_model, volume_fraction
from prefine.cli import build_parser, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip()
    return code, json.loads(out) if out else None


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, _cli_module_capsys=None):
    root = tmp_path_factory.mktemp("cli_model")
    path = root / "gyroid.pft"
    code = main(
        [
            "gen",
            "--family",
            "gyroid",
            "--network",
            "solid",
            "--vf",
            "0.5",
            "--res",
            "8",
            "--nu",
            "0.3",
            "--out",
            str(path),
        ]
    )
    assert code == 0
    return path


class TestGen:
    def test_writes_model_and_summary(self, tmp_path, capsys):
        path = tmp_path / "m.pft"
        code, summary = run_cli(
            capsys,
            "gen",
            "--family",
            "primitive",
            "--network",
            "sheet",
            "--vf",
            "0.4",
            "--res",
            "8",
            "--nu",
            "0.25",
            "--out",
            str(path),
        )
        assert code == 0
        model, meta = load_model(path)
        assert model.resolution == 8
        assert model.poisson_ratio == 0.25
        assert abs(volume_fraction(model) - 0.4) <= 0.01
        assert meta["family"] == "primitive"
        assert meta["network"] == "sheet"
        assert summary["volume_fraction"] == volume_fraction(model)
        assert summary["c"] == meta["c"]

    def test_rejects_unknown_family(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(
                [
                    "gen",
                    "--family",
                    "spaghetti",
                    "--network",
                    "solid",
                    "--vf",
                    "0.5",
                    "--res",
                    "8",
                    "--nu",
                    "0.3",
                    "--out",
                    str(tmp_path / "x.pft"),
                ]
            )
        assert excinfo.value.code == 2

    def test_requires_subcommand(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2


class TestHomog:
    def test_converged_run_exits_zero(self, model_file, tmp_path, capsys):
        out = tmp_path / "homog"
        code, summary = run_cli(
            capsys,
            "homog",
            "--model",
            str(model_file),
            "--tol",
            "1e-8",
            "--out",
            str(out),
        )
        assert code == 0
        assert summary["unconverged_cases"] == []
        tensor = json.loads((out / "tensor.json").read_text())
        assert len(tensor["matrix"]) == 36
        assert (out / "fields.pft").exists()
        assert (out / "reports.json").exists()

    def test_unconverged_run_exits_one(self, model_file, tmp_path, capsys):
        out = tmp_path / "homog"
        code, summary = run_cli(
            capsys,
            "homog",
            "--model",
            str(model_file),
            "--tol",
            "1e-12",
            "--max-iters",
            "2",
            "--out",
            str(out),
        )
        assert code == 1
        assert summary["unconverged_cases"] == [0, 1, 2, 3, 4, 5]

    def test_warm_start_flag(self, model_file, tmp_path, capsys):
        cold = tmp_path / "cold"
        run_cli(
            capsys,
            "homog",
            "--model",
            str(model_file),
            "--tol",
            "1e-8",
            "--out",
            str(cold),
        )
        warm = tmp_path / "warm"
        code, _ = run_cli(
            capsys,
            "homog",
            "--model",
            str(model_file),
            "--tol",
            "1e-8",
            "--init",
            str(cold / "fields.pft"),
            "--out",
            str(warm),
        )
        assert code == 0
        warm_iters = sum(
            r["iterations"] for r in json.loads((warm / "reports.json").read_text())
        )
        cold_iters = sum(
            r["iterations"] for r in json.loads((cold / "reports.json").read_text())
        )
        assert warm_iters < cold_iters


class TestDataset:
    def test_generates_manifest(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps({"count": 1, "resolution": 8, "seed": 3, "solver": {"tol": 1e-6}})
        )
        out = tmp_path / "data"
        code, summary = run_cli(
            capsys, "dataset", "--config", str(config), "--out", str(out)
        )
        assert code == 0
        assert summary["samples"] == 1
        assert summary["failures"] == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["samples"]) == 1

    def test_failures_exit_one(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "count": 1,
                    "resolution": 8,
                    "seed": 3,
                    "families": ["bogus"],
                    "solver": {"tol": 1e-6},
                }
            )
        )
        code, summary = run_cli(
            capsys, "dataset", "--config", str(config), "--out", str(tmp_path / "d")
        )
        assert code == 1
        assert summary["failures"] == 1


class TestBench:
    def test_runs_grid(self, model_file, tmp_path, capsys):
        config = tmp_path / "bench.json"
        config.write_text(
            json.dumps(
                {
                    "models": [str(model_file)],
                    "tols": [1e-5],
                    "init_sources": ["zero", {"coarse": 2}],
                }
            )
        )
        out = tmp_path / "bench"
        code, summary = run_cli(
            capsys, "bench", "--config", str(config), "--out", str(out)
        )
        assert code == 0
        assert summary["cells"] == 2
        payload = json.loads((out / "bench.json").read_text())
        assert {r["init"] for r in payload["rows"]} == {"zero", "coarse2"}


class TestCalibrate:
    def test_fits_factor(self, tmp_path, capsys):
        from oracles import isotropic_voigt
        from prefine import HomogenizedTensor

        truth = isotropic_voigt(1.0, 0.3)
        (tmp_path / "t.json").write_text(
            json.dumps(HomogenizedTensor(matrix=truth).to_json_dict())
        )
        (tmp_path / "p.json").write_text(
            json.dumps(HomogenizedTensor(matrix=0.5 * truth).to_json_dict())
        )
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                {
                    "samples": [
                        {
                            "id": 0,
                            "tensor_file": "t.json",
                            "pred_tensor_file": "p.json",
                        }
                    ]
                }
            )
        )
        out = tmp_path / "scaling.json"
        code, summary = run_cli(
            capsys, "calibrate", "--manifest", str(manifest), "--out", str(out)
        )
        assert code == 0
        assert summary["train_count"] == 1
        saved = json.loads(out.read_text())
        values = np.array(saved["values"]).reshape(6, 6)
        mask = np.array(saved["mask"]).reshape(6, 6)
        np.testing.assert_allclose(values[~mask], 2.0, rtol=1e-12)


class TestParser:
    def test_all_subcommands_registered(self):
        parser = build_parser()
        actions = {
            a.dest: a for a in parser._actions if a.dest == "command"
        }
        sub = actions["command"]
        assert set(sub.choices) == {"gen", "homog", "dataset", "bench", "calibrate"}

    def test_console_script_installed(self):
        from importlib.metadata import entry_points

        eps = entry_points()
        scripts = eps.select(group="console_scripts", name="prefine")
        assert any(ep.value == "prefine.cli:main" for ep in scripts)
