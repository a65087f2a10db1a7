"""CLI subcommands: outputs, manifests, config resolution, exit codes."""

import json

import pytest

from pilotwave.cli import main


def run(args, tmp_path, name="out"):
    outdir = tmp_path / name
    code = main(args + ["--out", str(outdir)])
    return code, outdir


def manifest_without_timestamp(path):
    data = json.loads((path / "manifest.json").read_text())
    data.pop("created_at")
    return data


class TestSubcommands:
    def test_ks_check_peres(self, tmp_path, capsys):
        code, outdir = run(["ks-check", "--rays", "peres33"], tmp_path)
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["verdict"] == "Unsatisfiable"
        assert "PASS" in capsys.readouterr().out

    def test_ks_check_satisfiable_file_still_exits_zero(self, tmp_path):
        rays = tmp_path / "rays.txt"
        rays.write_text("1 0 0\n0 1 0\n0 0 1\n")
        code, outdir = run(["ks-check", "--rays", str(rays)], tmp_path)
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["verdict"] == "Satisfiable"

    def test_mermin(self, tmp_path):
        code, outdir = run(["mermin"], tmp_path)
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["satisfying_assignments"] == 0

    def test_double_slit_upper(self, tmp_path, capsys):
        code, outdir = run(
            ["double-slit", "--slits", "upper", "--ensemble", "1500"], tmp_path
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "maxima=1" in out
        assert (outdir / "outcome.csv").exists()
        assert (outdir / "summary.json").exists()

    def test_double_slit_both_with_trajectories(self, tmp_path):
        code, outdir = run(
            ["double-slit", "--ensemble", "1500", "--emit-trajectories", "5"], tmp_path
        )
        assert code == 0
        trajs = sorted((outdir / "trajectories").iterdir())
        assert len(trajs) == 5

    def test_stern_gerlach_single_shot(self, tmp_path, capsys):
        code, _ = run(
            ["stern-gerlach", "--ensemble", "0", "--z0", "0.5"], tmp_path
        )
        assert code == 0
        assert "label=up" in capsys.readouterr().out

    def test_stern_gerlach_contextuality(self, tmp_path):
        code, outdir = run(["stern-gerlach", "--contextuality", "10"], tmp_path)
        assert code == 0
        data = json.loads((outdir / "contextuality.json").read_text())
        assert data["same_deflection"] == 10
        assert data["negated_label"] == 10

    def test_equivariance_small(self, tmp_path):
        code, outdir = run(
            ["equivariance", "--n", "3000", "--t", "1.0"], tmp_path
        )
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["pass"] is True
        assert (outdir / "histogram.csv").exists()

    def test_box_small(self, tmp_path):
        code, outdir = run(
            ["box", "--ensemble", "2000", "--flight-time", "4.0",
             "--rest-trajectories", "3"],
            tmp_path,
        )
        assert code == 0
        rest = sorted((outdir / "rest_trajectories").iterdir())
        assert len(rest) == 3

    def test_epr(self, tmp_path):
        code, outdir = run(["epr", "--trials", "2000"], tmp_path)
        assert code == 0
        rows = (outdir / "records.csv").read_text().strip().splitlines()
        assert len(rows) == 2001

    def test_epr_dim4(self, tmp_path):
        code, outdir = run(["epr", "--dim", "4", "--trials", "2000"], tmp_path)
        assert code == 0
        summary = json.loads((outdir / "summary.json").read_text())
        assert summary["equal_outcomes"] == 2000

    def test_chsh(self, tmp_path, capsys):
        code, outdir = run(["chsh", "--trials", "20000"], tmp_path)
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["classical_max_abs_S"] == 2
        assert abs(abs(report["exact_S"]) - 2 * 2**0.5) < 1e-12

    def test_schroedinger_demo(self, tmp_path):
        code, outdir = run(["schroedinger-demo", "--trials", "200"], tmp_path)
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["conclusion"] == "locality refuted under stated premises"

    def test_schroedinger_demo_rejects_dim2(self, tmp_path):
        code, _ = run(["schroedinger-demo", "--dim", "2"], tmp_path)
        assert code == 2


class TestConfigResolution:
    def test_config_file_and_flag_priority(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[double-slit]\nensemble = 1200\nslits = upper\n")
        code, outdir = run(
            ["double-slit", "--config", str(cfg), "--slits", "both",
             "--ensemble", "1500"],
            tmp_path,
        )
        assert code == 0
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["resolved"]["slits"] == "both"
        assert manifest["sources"]["slits"] == "flag"
        assert manifest["resolved"]["ensemble"] == 1500
        assert manifest["sources"]["separation"] == "default"

    def test_config_file_used_when_no_flag(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[double-slit]\nensemble = 1200\n")
        code, outdir = run(["double-slit", "--config", str(cfg)], tmp_path)
        assert code == 0
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["resolved"]["ensemble"] == 1200
        assert manifest["sources"]["ensemble"] == "config"

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[double-slit]\nwormholes = 3\n")
        code, _ = run(["double-slit", "--config", str(cfg)], tmp_path)
        assert code == 2

    def test_missing_config_file(self, tmp_path):
        code, _ = run(["mermin", "--config", str(tmp_path / "nope.ini")], tmp_path)
        assert code == 2

    def test_determinism_byte_identical(self, tmp_path):
        code1, out1 = run(["epr", "--trials", "500", "--seed", "9"], tmp_path, "a")
        code2, out2 = run(["epr", "--trials", "500", "--seed", "9"], tmp_path, "b")
        assert code1 == code2 == 0
        assert (out1 / "records.csv").read_bytes() == (out2 / "records.csv").read_bytes()
        r1 = manifest_without_timestamp(out1)["resolved"]
        r2 = manifest_without_timestamp(out2)["resolved"]
        r1.pop("out"), r2.pop("out")
        assert r1 == r2

    def test_bad_equivariance_case(self, tmp_path):
        code, _ = run(["equivariance", "--case", "pendulum", "--n", "1000"], tmp_path)
        assert code == 2


class TestExitCodes:
    def test_assertion_failure_exits_one(self, tmp_path, capsys):
        # a too-short flight time leaves the packets overlapping
        code, _ = run(
            ["stern-gerlach", "--ensemble", "0", "--z0", "0.4",
             "--coupling", "2.0", "--flight-time", "0.3"],
            tmp_path,
        )
        assert code == 1
        assert "FAIL" in capsys.readouterr().err

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as err:
            main(["teleport"])
        assert err.value.code == 2
