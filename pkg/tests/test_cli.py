"""CLI contracts: subcommands, exit codes, determinism."""

import json

import pytest
from click.testing import CliRunner

from surfbeam.cli import main

SMALL_CONFIG = {
    "grid": {"nz": 24, "dz_mm": 2.0, "nr": 32, "dr_mm": 0.6, "nt": 512,
             "dt_ns": 20.0, "t0_us": -5.12},
    "pulse": {"f_l_mhz": 1.0, "bw_l": 0.5, "tau0_us": -0.1},
}
REGION = "20,44"


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def cli_run_dir(tmp_path_factory, runner):
    base = tmp_path_factory.mktemp("cli")
    cfg = base / "config.json"
    cfg.write_text(json.dumps(SMALL_CONFIG))
    out = base / "run"
    result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


class TestSimulate:
    def test_creates_field_files(self, cli_run_dir):
        for name in ("hf_plus.f32", "hf_minus.f32", "hf_zero.f32", "manifest.json"):
            assert (cli_run_dir / name).exists()

    def test_plane_wave_mode(self, runner, tmp_path):
        out = tmp_path / "plane"
        result = runner.invoke(main, ["simulate", "--mode", "plane-wave", "--out", str(out)])
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["grid"]["nr"] == 1

    def test_malformed_config_exit_2(self, runner, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"pulse": {"f_h_mhz": -1}}))
        out = tmp_path / "run"
        result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
        assert result.exit_code == 2
        assert "f_l" in result.output or "f_h" in result.output or "CONFIG" in result.output

    def test_unknown_config_key_named(self, runner, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"pulse": {"frequency_mhz": 3.5}}))
        result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out",
                                      str(tmp_path / "r")])
        assert result.exit_code == 2
        assert "frequency_mhz" in result.output


class TestAdjust:
    def test_delay_adjustment(self, runner, cli_run_dir):
        result = runner.invoke(main, ["adjust", str(cli_run_dir),
                                      "--variant", "delay", "--tau-ns", "7.1"])
        assert result.exit_code == 0, result.output
        assert (cli_run_dir / "difference_delay_+7.1ns.f32").exists()
        assert (cli_run_dir / "adjustment_delay_+7.1ns.json").exists()

    def test_equalizer_adjustment(self, runner, cli_run_dir):
        result = runner.invoke(main, ["adjust", str(cli_run_dir),
                                      "--variant", "equalizer", "--za-mm", "30",
                                      "--epsilon", "1e-3"])
        assert result.exit_code == 0, result.output
        spec = json.loads((cli_run_dir / "adjustment_eq_za30.0mm.json").read_text())
        assert spec["variant"] == "equalizer"
        assert spec["epsilon"] == 1e-3

    def test_delay_out_of_range_exit_2(self, runner, cli_run_dir):
        result = runner.invoke(main, ["adjust", str(cli_run_dir),
                                      "--variant", "delay", "--tau-ns", "1e9"])
        assert result.exit_code == 2
        assert "DELAY_TOO_LARGE" in result.output

    def test_missing_variant_args_exit_2(self, runner, cli_run_dir):
        result = runner.invoke(main, ["adjust", str(cli_run_dir), "--variant", "delay"])
        assert result.exit_code == 2


class TestQuality:
    def test_reports_written(self, runner, cli_run_dir, tmp_path):
        out = tmp_path / "q"
        result = runner.invoke(main, ["quality", str(cli_run_dir),
                                      "--region", REGION, "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "quality.json").exists()
        assert (out / "q_za.csv").exists()
        assert (out / "beam_fundamental.csv").exists()
        doc = json.loads((out / "quality.json").read_text())
        assert "fundamental" in doc["q_general_db"]

    def test_deterministic_outputs(self, runner, cli_run_dir, tmp_path):
        outs = []
        for name in ("q1", "q2"):
            out = tmp_path / name
            result = runner.invoke(main, ["quality", str(cli_run_dir),
                                          "--region", REGION, "--out", str(out)])
            assert result.exit_code == 0
            outs.append(out)
        for fname in ("quality.json", "q_za.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_run_without_adjustments_exit_3(self, runner, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(SMALL_CONFIG))
        out = tmp_path / "bare"
        assert runner.invoke(main, ["simulate", "--config", str(cfg),
                                    "--out", str(out)]).exit_code == 0
        result = runner.invoke(main, ["quality", str(out), "--region", REGION])
        assert result.exit_code == 3
        assert "MISSING_FIELD" in result.output


class TestSweep:
    def test_za_list(self, runner, cli_run_dir, tmp_path):
        out = tmp_path / "sweep"
        result = runner.invoke(main, [
            "sweep", str(cli_run_dir), "--za-list", "6,10,20",
            "--adjustments", "none,delay,equalizer", "--region", REGION,
            "--out", str(out)])
        assert result.exit_code == 0, result.output
        rows = (out / "q_za.csv").read_text().splitlines()
        assert rows[0] == "z_a_mm,adjustment,Q_dB"
        assert len([r for r in rows[1:] if r]) == 3 * 4
        assert (out / "tau_opt.csv").exists()
        assert (out / "q_vs_tau.csv").exists()

    def test_za_range(self, runner, cli_run_dir, tmp_path):
        out = tmp_path / "sweep_range"
        result = runner.invoke(main, [
            "sweep", str(cli_run_dir), "--za-range", "4:12:4",
            "--adjustments", "none", "--region", REGION, "--out", str(out)])
        assert result.exit_code == 0, result.output
        rows = [r for r in (out / "q_za.csv").read_text().splitlines()[1:] if r]
        # three za, fundamental + none rows each
        assert len(rows) == 3 * 2

    def test_baseline_only(self, runner, cli_run_dir, tmp_path):
        out = tmp_path / "sweep_none"
        result = runner.invoke(main, [
            "sweep", str(cli_run_dir), "--za-list", "10",
            "--adjustments", "none", "--region", REGION, "--out", str(out)])
        assert result.exit_code == 0
        assert not (out / "tau_opt.csv").exists()

    def test_missing_za_exit_2(self, runner, cli_run_dir):
        result = runner.invoke(main, ["sweep", str(cli_run_dir), "--region", REGION])
        assert result.exit_code == 2

    def test_deterministic_rerun(self, runner, cli_run_dir, tmp_path):
        outs = []
        for name in ("s1", "s2"):
            out = tmp_path / name
            result = runner.invoke(main, [
                "sweep", str(cli_run_dir), "--za-list", "6,10",
                "--adjustments", "delay", "--region", REGION, "--out", str(out)])
            assert result.exit_code == 0
            outs.append(out)
        for fname in ("q_za.csv", "tau_opt.csv", "q_vs_tau.csv", "quality.json"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


class TestServe:
    def test_occupied_port_exit_2(self, tmp_path):
        import socket
        import subprocess
        import sys

        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.listen(1)
        try:
            proc = subprocess.run(
                [sys.executable, "-m", "surfbeam.cli", "serve", str(tmp_path),
                 "--port", str(port)],
                capture_output=True, text=True, timeout=60)
            assert proc.returncode == 2
            assert "PORT_IN_USE" in proc.stderr
        finally:
            sock.close()
