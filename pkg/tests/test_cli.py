import csv
import json

import numpy as np
import pytest

from nml import cli


def run(argv):
    return cli.main(argv)


class TestBasicCommands:
    def test_meanfield_hc_complete(self, tmp_path, capsys):
        assert run(["meanfield", "hc", "--mode", "complete", "--d", "6", "--J", "1",
                    "--out-dir", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "hc.json").read_text())
        assert payload["h_c"] == pytest.approx(8.493, abs=1e-3)

    def test_meanfield_hc_partial_and_replica(self, tmp_path):
        assert run(["meanfield", "hc", "--mode", "partial", "--d", "1", "--J", "1",
                    "--out-dir", str(tmp_path / "a")]) == 0
        assert json.loads((tmp_path / "a" / "hc.json").read_text())["h_c"] == 4.0
        assert run(["meanfield", "hc", "--mode", "partial", "--d", "1", "--J", "1",
                    "--R", "2", "--out-dir", str(tmp_path / "b")]) == 0
        assert json.loads((tmp_path / "b" / "hc.json").read_text())["h_c"] == 0.5

    def test_meanfield_point_partial_lre(self, tmp_path):
        assert run(["meanfield", "point", "--mode", "partial", "--d", "6", "--J", "1",
                    "--h", "10", "--tf", "5", "--out-dir", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "point.json").read_text())
        assert payload["label"] == "LRE"

    def test_analytic_xi_renyi2(self, tmp_path, capsys):
        assert run(["analytic", "xi-renyi2", "--Jtf", "0.25", "--out-dir", str(tmp_path)]) == 0
        out = capsys.readouterr().out.strip().splitlines()[0]
        assert float(out) == pytest.approx(3.672, abs=5e-4)

    def test_analytic_duality(self, tmp_path):
        assert run(["analytic", "duality", "--out-dir", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "duality.json").read_text())
        assert payload["h_over_J_critical"] == 1.0
        assert payload["regimes"]["h/J > 1"] == "saturates"

    def test_propagator_dz_flat(self, tmp_path):
        assert run(["propagator", "dz", "--h", "0", "--tf", "0.5", "--samples", "7",
                    "--out-dir", str(tmp_path)]) == 0
        with open(tmp_path / "dz_curve.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 7
        assert all(float(r["value"]) == 1.0 for r in rows)

    def test_propagator_dk_symmetric(self, tmp_path):
        # h=4 at t_f=0.5 sits in the zero-saddle-field regime: flat, symmetric
        assert run(["propagator", "dk", "--d", "6", "--J", "1", "--h", "4", "--tf", "0.5",
                    "--samples", "21", "--out-dir", str(tmp_path)]) == 0
        with open(tmp_path / "dk_curve.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        resid = max(abs(float(r["reflection_residual"])) for r in rows)
        assert resid < 1e-9
        assert all(float(r["value"]) > 0 for r in rows)

    def test_propagator_dk_decaying(self, tmp_path):
        # h=12 turns the saddle field on: decaying symmetric curve
        assert run(["propagator", "dk", "--d", "6", "--J", "1", "--h", "12", "--tf", "0.5",
                    "--samples", "21", "--out-dir", str(tmp_path)]) == 0
        with open(tmp_path / "dk_curve.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        vals = [float(r["value"]) for r in rows]
        assert vals[0] > 10 * vals[len(vals) // 2]
        assert max(abs(float(r["reflection_residual"])) for r in rows) < 1e-9

    def test_simulate_beta_z_zero(self, tmp_path):
        assert run(["simulate", "--L", "4", "--beta-z", "0", "--beta-x", "0.1",
                    "--mode", "complete", "--rounds", "2", "--traj", "3", "--seed", "1",
                    "--out-dir", str(tmp_path)]) == 0
        with open(tmp_path / "ea_correlators.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(float(r["value"]) == 0.0 for r in rows)

    def test_meanfield_scan_small(self, tmp_path):
        assert run(["meanfield", "scan", "--mode", "none", "--d", "6", "--J", "1",
                    "--h-max", "30", "--n-h", "4", "--n-tf", "12",
                    "--out-dir", str(tmp_path)]) == 0
        with open(tmp_path / "phase_points.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 48
        assert set(rows[0].keys()) == {"mode", "d", "J", "h", "t_f", "q_s", "r_coeff", "label"}
        with open(tmp_path / "critical_line.csv", newline="") as fh:
            crit = list(csv.DictReader(fh))
        tc = 1 / 24
        for row in crit:
            assert float(row["t_f_refined"]) == pytest.approx(tc, rel=1e-3)


class TestManifestAndDeterminism:
    def test_manifest_written(self, tmp_path):
        run(["analytic", "duality", "--out-dir", str(tmp_path)])
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "analytic duality"
        assert manifest["version"]
        assert any(p.endswith("duality.json") for p in manifest["outputs"])

    def test_dry_run_no_outputs(self, tmp_path, capsys):
        out = tmp_path / "dry"
        assert run(["simulate", "--L", "3", "--rounds", "2", "--traj", "2",
                    "--out-dir", str(out), "--dry-run"]) == 0
        assert not out.exists()
        payload = json.loads(capsys.readouterr().out)
        assert payload["L"] == 3 and payload["rounds"] == 2

    def test_csv_bytes_identical_across_workers(self, tmp_path):
        base = ["simulate", "--L", "3", "--beta-z", "0.2", "--beta-x", "0.1",
                "--mode", "partial", "--rounds", "3", "--traj", "6", "--seed", "7"]
        run(base + ["--out-dir", str(tmp_path / "w1"), "--workers", "1"])
        run(base + ["--out-dir", str(tmp_path / "w2"), "--workers", "2"])
        for name in ("ea_correlators.csv", "fidelity_correlators.csv", "xi_fits.csv"):
            a = (tmp_path / "w1" / name).read_bytes()
            b = (tmp_path / "w2" / name).read_bytes()
            assert a == b

    def test_rfc4180_crlf_and_header(self, tmp_path):
        run(["propagator", "dz", "--h", "1", "--tf", "0.5", "--samples", "3",
             "--out-dir", str(tmp_path)])
        raw = (tmp_path / "dz_curve.csv").read_bytes()
        lines = raw.split(b"\r\n")
        assert lines[0] == b"delta_t,value,reflection_residual"
        assert raw.count(b"\r\n") == 4  # header + 3 rows + trailing

    def test_17_digit_serialization(self, tmp_path):
        run(["analytic", "xi-renyi2", "--Jtf", "0.25", "--out-dir", str(tmp_path)])
        with open(tmp_path / "xi_renyi2.csv", newline="") as fh:
            row = list(csv.DictReader(fh))[0]
        assert float(row["xi"]) == -1.0 / np.log(np.tanh(1.0))

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("L = 4\nbeta-z = 0.3\nrounds = 2\ntraj = 2\nmode = none\n")
        out = tmp_path / "out"
        assert run(["simulate", "--config", str(cfg), "--beta-z", "0.5",
                    "--out-dir", str(out), "--dry-run"]) == 0

    def test_config_file_values_used(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("L = 5\nrounds = 7\n# comment\n")
        assert run(["simulate", "--config", str(cfg), "--dry-run"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["L"] == 5 and payload["rounds"] == 7


class TestErrors:
    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not a key value line\n")
        assert run(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("bogus = 3\n")
        assert run(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2

    def test_invalid_parameters(self, tmp_path):
        assert run(["simulate", "--L", "1", "--out-dir", str(tmp_path)]) == 2
        assert run(["meanfield", "hc", "--mode", "none", "--out-dir", str(tmp_path)]) == 2
        assert run(["meanfield", "hc", "--mode", "partial", "--R", "1",
                    "--out-dir", str(tmp_path)]) == 2

    def test_argparse_exit_code(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cli.main(["simulate", "--mode", "bogus"])
        assert exc.value.code == 2


class TestWorkersAndReplay:
    def test_nml_workers_env(self, monkeypatch):
        monkeypatch.delenv("NML_WORKERS", raising=False)
        assert cli.resolve_workers(3) == 3
        monkeypatch.setenv("NML_WORKERS", "5")
        assert cli.resolve_workers(None) == 5
        monkeypatch.delenv("NML_WORKERS")
        assert cli.resolve_workers(None) >= 1

    def test_numerical_error_exit_code(self, tmp_path, monkeypatch):
        from nml import meanfield
        from nml.errors import NumericalError

        def boom(*a, **k):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(meanfield, "classify_point", boom)
        assert run(["meanfield", "point", "--mode", "partial", "--d", "6", "--J", "1",
                    "--h", "1", "--tf", "1", "--out-dir", str(tmp_path)]) == 3

    def test_manifest_replay_reproduces_outputs(self, tmp_path):
        args = ["simulate", "--L", "3", "--beta-z", "0.25", "--beta-x", "0.05",
                "--mode", "partial", "--rounds", "3", "--traj", "5", "--seed", "11"]
        run(args + ["--out-dir", str(tmp_path / "a")])
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        cfg = manifest["config"]
        replay = ["simulate", "--L", str(cfg["L"]), "--beta-z", str(cfg["beta_z"]),
                  "--beta-x", str(cfg["beta_x"]), "--mode", cfg["mode"],
                  "--rounds", str(cfg["rounds"]), "--traj", str(cfg["traj"]),
                  "--seed", str(cfg["seed"]), "--out-dir", str(tmp_path / "b")]
        run(replay)
        for name in ("ea_correlators.csv", "fidelity_correlators.csv", "xi_fits.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestPlots:
    def test_simulate_plot_outputs(self, tmp_path):
        assert run(["simulate", "--L", "3", "--beta-z", "0.4", "--rounds", "4",
                    "--traj", "8", "--seed", "2", "--mode", "complete",
                    "--out-dir", str(tmp_path), "--plot"]) == 0
        assert (tmp_path / "xi_vs_round.png").exists()
        assert (tmp_path / "ea_decay.png").exists()

    def test_scan_plot(self, tmp_path):
        assert run(["meanfield", "scan", "--mode", "none", "--d", "6", "--J", "1",
                    "--h-max", "10", "--n-h", "3", "--n-tf", "8",
                    "--out-dir", str(tmp_path), "--plot"]) == 0
        assert (tmp_path / "phase_diagram.png").exists()

    def test_propagator_plot(self, tmp_path):
        assert run(["propagator", "dr", "--R", "2", "--h", "1", "--tf", "2",
                    "--samples", "9", "--out-dir", str(tmp_path), "--plot"]) == 0
        assert (tmp_path / "dr_curve.png").exists()
