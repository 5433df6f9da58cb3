import json
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from ptpflow.cli import cli

TINY_SIMULATE = """
kind = "simulate"
m = 1.1
gamma = 1.0
g = 1.0
count = 3
t_max = 20.0
"""


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, args):
    return runner.invoke(cli, args, standalone_mode=False, catch_exceptions=False)


class TestSubcommands:
    def test_fixed_points_direct_flags(self, runner, tmp_path):
        result = invoke(
            runner,
            ["--out-dir", str(tmp_path), "fixed-points", "--m", "1.1", "--gamma", "1.0", "--g", "1.0"],
        )
        assert result.exit_code in (0, None)
        payload = json.loads((tmp_path / "fixed_points.json").read_text())
        assert len(payload["fixed_points"]) == 3

    def test_simulate_config(self, runner, tmp_path):
        cfg = tmp_path / "scen.toml"
        cfg.write_text(TINY_SIMULATE)
        result = invoke(
            runner, ["--config", str(cfg), "--out-dir", str(tmp_path / "out"), "simulate"]
        )
        assert result.exit_code in (0, None)
        assert (tmp_path / "out" / "summary.json").exists()
        assert (tmp_path / "out" / "traj_0002.csv").exists()

    def test_discriminate_direct_flags(self, runner, tmp_path):
        result = invoke(
            runner,
            [
                "--out-dir", str(tmp_path),
                "discriminate",
                "--m", "1.1", "--gamma", "1.0", "--g", "1.0",
                "--k", "4", "--k", "6", "--trials", "2",
            ],
        )
        assert result.exit_code in (0, None)
        lines = (tmp_path / "discrimination_summary.csv").read_text().splitlines()
        assert len(lines) == 3

    def test_config_kind_mismatch(self, runner, tmp_path):
        cfg = tmp_path / "scen.toml"
        cfg.write_text(TINY_SIMULATE)
        from ptpflow.scenario import ScenarioError

        with pytest.raises(ScenarioError, match="does not match subcommand"):
            invoke(runner, ["--config", str(cfg), "fixed-points"])

    def test_seed_override(self, runner, tmp_path):
        cfg = tmp_path / "scen.toml"
        cfg.write_text(TINY_SIMULATE)
        invoke(
            runner,
            ["--config", str(cfg), "--seed", "123", "--out-dir", str(tmp_path / "out"), "simulate"],
        )
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["seed"] == 123


class TestExitCodes:
    def run_cli(self, args, cwd):
        return subprocess.run(
            [sys.executable, "-m", "ptpflow.cli", *args],
            capture_output=True,
            text=True,
            cwd=cwd,
        )

    def test_success_is_zero(self, tmp_path):
        proc = self.run_cli(
            ["--out-dir", str(tmp_path), "fixed-points", "--m", "1.1", "--gamma", "1.0", "--g", "1.0"],
            tmp_path,
        )
        assert proc.returncode == 0
        assert "fixed_points.json" in proc.stdout

    def test_validation_error_is_one(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('kind = "simulate"\nm = 1.0\n')  # missing gamma, g
        proc = self.run_cli(["--config", str(bad), "simulate"], tmp_path)
        assert proc.returncode == 1
        assert "missing required field" in proc.stderr

    def test_syntax_error_is_one(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("kind = =\n")
        proc = self.run_cli(["--config", str(bad), "simulate"], tmp_path)
        assert proc.returncode == 1

    def test_missing_required_args_is_one(self, tmp_path):
        proc = self.run_cli(["simulate"], tmp_path)
        assert proc.returncode == 1
        assert "needs --config or --preset" in proc.stderr

    def test_runtime_error_is_two(self, tmp_path):
        proc = self.run_cli(
            [
                "--out-dir", "/proc/nonexistent/deeper",
                "fixed-points", "--m", "1.1", "--gamma", "1.0", "--g", "1.0",
            ],
            tmp_path,
        )
        assert proc.returncode == 2
        assert "/proc/nonexistent" in proc.stderr
