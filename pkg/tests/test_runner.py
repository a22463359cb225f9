import csv
import json

import numpy as np
import pytest

from geovlasov.cli import main
from geovlasov.runner import ConfigError, ScenarioConfig, get_path, load_config, run_scenario, set_path, sweep

SIM = {
    "kind": "simulate",
    "manifold": "sphere",
    "grid": {"nx": 32, "nv": 128},
    "time": {"T": 1.0, "dt": 0.125, "cadence": 2},
    "initial": {"mass": 0.5, "epsilon": 0.05},
}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_empty_config_lists_required(self):
        with pytest.raises(ConfigError) as err:
            ScenarioConfig.from_dict({})
        assert "kind" in str(err.value) and "manifold" in str(err.value)

    @pytest.mark.parametrize("patch,key", [
        ({"kind": "explode"}, "kind"),
        ({"manifold": "torus"}, "manifold"),
        ({"grid": {"nx": 0}}, "grid.nx"),
        ({"grid": {"nx": 3.5}}, "grid.nx"),
        ({"grid": {"bogus": 1}}, "grid.bogus"),
        ({"grid": {"bc": "reflecting"}}, "grid.bc"),
        ({"time": {"T": 1.0, "dt": 0.3}}, "time.dt"),
        ({"initial": {"epsilon": 1.5}}, "initial.epsilon"),
        ({"initial": {"type": "custom_expression"}}, "initial.expression"),
        ({"seed": "x"}, "seed"),
    ])
    def test_validation_names_key(self, patch, key):
        data = {**SIM, **patch}
        with pytest.raises(ConfigError) as err:
            ScenarioConfig.from_dict(data)
        assert err.value.key == key

    def test_linear_validation(self):
        base = {"kind": "linear", "manifold": "sphere"}
        with pytest.raises(ConfigError, match="linear.modes"):
            ScenarioConfig.from_dict({**base, "linear": {"modes": [1.5]}})
        with pytest.raises(ConfigError, match="linear.xi_grid"):
            ScenarioConfig.from_dict({**base, "linear": {"xi_grid": True}})
        with pytest.raises(ConfigError, match="linear.profile"):
            ScenarioConfig.from_dict({**base, "linear": {"profile": "gamma:2"}})
        with pytest.raises(ConfigError, match="linear.fit_window"):
            ScenarioConfig.from_dict({**base, "linear": {"fit_window": [5, 1]}})

    def test_field_validation(self):
        with pytest.raises(ConfigError, match="field.density"):
            ScenarioConfig.from_dict({"kind": "field", "manifold": "hyperbolic", "field": {"density": "uniform"}})
        with pytest.raises(ConfigError, match="field.gauss_alpha"):
            ScenarioConfig.from_dict({"kind": "field", "manifold": "sphere", "field": {"gauss_alpha": [4.0]}})

    def test_toml_and_json_agree(self, tmp_path):
        (tmp_path / "a.toml").write_text('kind = "penrose"\nmanifold = "sphere"\n[penrose]\nprofile = "maxwellian:0.5"\n')
        (tmp_path / "a.json").write_text(json.dumps({"kind": "penrose", "manifold": "sphere",
                                                     "penrose": {"profile": "maxwellian:0.5"}}))
        assert load_config(tmp_path / "a.toml") == load_config(tmp_path / "a.json")

    def test_unreadable_config(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.toml")
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.json")

    def test_paths(self):
        data = {}
        set_path(data, "penrose.profile.mass", 0.3)
        assert get_path(data, "penrose.profile.mass") == 0.3
        assert get_path(data, "penrose.profile.type") == "maxwellian"


class TestScenarios:
    def test_kernel_sphere_rows(self, tmp_path):
        m = run_scenario({"kind": "kernel", "manifold": "sphere", "kernel": {"modes": 8}}, tmp_path)
        rows = read_csv(tmp_path / "kernel.csv")
        assert len(rows) == 8
        for r in rows:
            k = int(r["mode_or_xi"])
            assert float(r["analytic"]) == (1.0 / k if k % 2 else 0.0)
            assert float(r["abs_err"]) < 1e-8
        assert m["files"] == ["kernel.csv"]
        assert (tmp_path / "manifest.json").exists()

    def test_manifest_contents(self, tmp_path):
        m = run_scenario({"kind": "penrose", "manifold": "hyperbolic"}, tmp_path)
        disk = json.loads((tmp_path / "manifest.json").read_text())
        assert disk["config"]["manifold"] == "hyperbolic"
        assert {"python", "numpy", "scipy"} <= set(disk["versions"])
        assert disk["wall_time_s"] >= 0
        assert m["metrics"]["verdict"] == "stable"
        report = json.loads((tmp_path / "penrose.json").read_text())
        assert report["margin"] == pytest.approx(-1 + 4 / np.pi, abs=1e-6)

    def test_simulate_deterministic(self, tmp_path):
        a = run_scenario(SIM, tmp_path / "a")
        b = run_scenario(SIM, tmp_path / "b")
        assert a["checksums"]["diagnostics.csv"] == b["checksums"]["diagnostics.csv"]
        assert a["checksums"] == b["checksums"]

    def test_csv_full_precision(self, tmp_path):
        run_scenario(SIM, tmp_path)
        row = read_csv(tmp_path / "diagnostics.csv")[-1]
        assert float(row["N"]) == pytest.approx(0.5 * 2 * np.pi, rel=1e-12)
        assert len(row["E_kin"].replace("-", "").replace(".", "").split("e")[0]) >= 15

    def test_save_final(self, tmp_path):
        run_scenario({**SIM, "simulate": {"save_final": True}}, tmp_path)
        meta = json.loads((tmp_path / "f_final.json").read_text())
        f = np.fromfile(tmp_path / "f_final.bin", dtype="<f8").reshape(meta["shape"])
        assert f.shape == (32, 128)

    def test_failure_removes_partial_outputs(self, tmp_path):
        data = {**SIM, "grid": {"nx": 32, "nv": 128, "V": 2.0}}  # Maxwellian tails cut by the v wall
        with pytest.raises(ValueError):
            run_scenario(data, tmp_path)
        assert list(tmp_path.iterdir()) == []

    def test_field_scenario(self, tmp_path):
        m = run_scenario({"kind": "field", "manifold": "sphere", "field": {"eval_grid": 4}}, tmp_path)
        assert m["metrics"]["max_flux_error"] < 1e-10
        assert len(read_csv(tmp_path / "field.csv")) == 16

    def test_linear_and_fit(self, tmp_path):
        lin = {"kind": "linear", "manifold": "sphere", "linear": {"modes": [1], "T": 10.0, "h": 0.05, "stride": 1}}
        m = run_scenario(lin, tmp_path / "lin")
        assert m["metrics"]["r2"] > 0.99
        fit = {"kind": "fit", "fit": {"input": str(tmp_path / "lin" / "volterra.csv"),
                                      "y_column": "abs_phi", "window": [3.0, 10.0]}}
        f = run_scenario(fit, tmp_path / "fit")
        assert f["metrics"]["rate"] == pytest.approx(m["metrics"]["rate"], rel=1e-9)


class TestSweep:
    def test_penrose_mass_sweep(self, tmp_path):
        tmpl = {"kind": "penrose", "manifold": "sphere"}
        res = sweep(tmpl, "penrose.profile.mass", [0.25, 0.5, 0.75], tmp_path, workers=2)
        margins = [r["metrics"]["margin"] for r in res]
        assert margins == pytest.approx([0.75, 0.5, 0.25], abs=1e-6)
        rows = read_csv(tmp_path / "sweep.csv")
        assert [float(r["margin"]) for r in rows] == pytest.approx(margins, abs=1e-15)

    def test_single_value_matches_run(self, tmp_path):
        tmpl = {"kind": "kernel", "manifold": "sphere", "kernel": {"modes": 5}}
        res = sweep(tmpl, "kernel.modes", [5], tmp_path / "s")
        direct = run_scenario(tmpl, tmp_path / "d")
        single = json.loads((tmp_path / "s" / "run_000" / "manifest.json").read_text())
        assert single["checksums"] == direct["checksums"]
        assert res[0]["metrics"] == direct["metrics"]

    def test_dt_sweep_energy_drift_decreases(self, tmp_path):
        tmpl = {**SIM, "time": {"T": 2.0, "dt": 0.125, "cadence": 1}}
        res = sweep(tmpl, "time.dt", [1 / 16, 1 / 32, 1 / 64], tmp_path)
        drift = [r["metrics"]["energy_drift"] for r in res]
        assert drift[0] > drift[1] > drift[2]

    def test_failures_recorded(self, tmp_path):
        tmpl = {"kind": "penrose", "manifold": "sphere"}
        res = sweep(tmpl, "penrose.profile.mass", [0.5, -1.0], tmp_path)
        assert res[0]["status"] == "ok"
        assert res[1]["status"].startswith("error")
        assert len(read_csv(tmp_path / "sweep.csv")) == 2

    def test_axis_must_be_scalar(self, tmp_path):
        with pytest.raises(ConfigError):
            sweep({"kind": "penrose", "manifold": "sphere"}, "penrose.profile", [1], tmp_path)
        with pytest.raises(ConfigError):
            sweep({"kind": "penrose", "manifold": "sphere"}, "penrose.nope", [1], tmp_path)


class TestCli:
    def test_kernel_ok(self, tmp_path, capsys):
        assert main(["kernel", "--manifold", "sphere", "--modes", "8", "--out", str(tmp_path)]) == 0
        assert len(read_csv(tmp_path / "kernel.csv")) == 8
        assert json.loads(capsys.readouterr().out)["kind"] == "kernel"

    def test_validation_exit_code(self, tmp_path, capsys):
        assert main(["simulate", "--manifold", "sphere", "--nx", "-4", "--out", str(tmp_path)]) == 2
        assert "grid.nx" in capsys.readouterr().err

    def test_missing_manifold(self, tmp_path):
        assert main(["penrose", "--out", str(tmp_path)]) == 2

    def test_runtime_exit_code(self, tmp_path, capsys):
        code = main(["simulate", "--manifold", "sphere", "--nx", "16", "--nv", "32", "--V", "2",
                     "--T", "0.5", "--dt", "0.25", "--out", str(tmp_path)])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_config_file_with_override(self, tmp_path):
        cfg = tmp_path / "p.toml"
        cfg.write_text('kind = "penrose"\nmanifold = "sphere"\n[penrose]\nprofile = "maxwellian:0.25"\n')
        assert main(["penrose", "--config", str(cfg), "--profile", "maxwellian:0.5", "--out", str(tmp_path / "o")]) == 0
        report = json.loads((tmp_path / "o" / "penrose.json").read_text())
        assert report["margin"] == pytest.approx(0.5, abs=1e-6)

    def test_sweep_command(self, tmp_path):
        cfg = tmp_path / "t.json"
        cfg.write_text(json.dumps({"kind": "penrose", "manifold": "sphere"}))
        code = main(["sweep", "--config", str(cfg), "--axis", "penrose.profile.mass",
                     "--values", "0.25,0.5", "--out", str(tmp_path / "sw"), "--workers", "2"])
        assert code == 0
        assert len(read_csv(tmp_path / "sw" / "sweep.csv")) == 2
