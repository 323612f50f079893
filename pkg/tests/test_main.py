"""
Tests for the command-line entry point.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Any
from unittest.mock import patch

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

import main
from models.schemas import VerificationRecord
from services.output_service import read_csv
from services.verification import (
    check_e1_reliability,
    check_optimal_two_packet,
    check_ratio_monte_carlo,
)


def grw_settings(**overrides: Any) -> dict[str, Any]:
    settings: dict[str, Any] = {
        "n_particles": 1,
        "grid_points": 32,
        "box_length": 16.0,
        "masses": [1.0],
        "lambda_rate": 0.0,
        "sigma": 1.0,
        "seed": 4,
        "snapshot_interval": 1.0,
        "initial_state": {"branches": [{"particles": [[{"center": 8.0, "width": 1.0}]]}]},
    }
    settings.update(overrides)
    return settings


class TestMainApplication:
    """Test cases for the grw-limits command line."""

    def setup_method(self) -> None:
        """Set up test fixtures."""
        self.temp_dir = tempfile.mkdtemp()
        self.out = Path(self.temp_dir) / "results"

    def teardown_method(self) -> None:
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def write_json(self, name: str, data: dict[str, Any]) -> Path:
        path = Path(self.temp_dir) / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    def run(self, *argv: str) -> int:
        return main.main([*argv, "--out", str(self.out), "--no-timestamp", "--quiet"])

    def test_presets(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test listing the demo presets."""
        assert main.main(["presets"]) == main.EXIT_OK
        output = capsys.readouterr().out

        assert "two-packet" in output
        assert "two-branch-object" in output

    def test_missing_command(self) -> None:
        """Test that a subcommand is required."""
        with pytest.raises(SystemExit):
            main.main([])

    def test_grw_run_without_collapses(self) -> None:
        """Test that lambda=0 writes a header-only flash log and density snapshots."""
        config = self.write_json("grw.json", grw_settings())

        assert self.run("grw-run", "--config", str(config), "--t-end", "2") == main.EXIT_OK

        lines = (self.out / "flashes.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["header"]["seed"] == 4
        _, rows = read_csv(self.out / "density.csv")
        assert {float(row["t"]) for row in rows} == {0.0, 1.0, 2.0}
        assert len(rows) == 3 * 32

    def test_invalid_sigma(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a non-positive sigma exits with the configuration error code."""
        config = self.write_json("bad.json", grw_settings(sigma=-1.0))

        assert self.run("grw-run", "--config", str(config)) == main.EXIT_CONFIG_ERROR
        assert "sigma" in capsys.readouterr().err

    def test_unknown_preset(self) -> None:
        """Test that an unknown preset is a configuration error."""
        assert self.run("massdensity", "--preset", "nope") == main.EXIT_CONFIG_ERROR

    def test_invalid_p_grid(self) -> None:
        """Test that probabilities outside [0, 1] are rejected."""
        assert self.run("figure1", "--p-grid", "0.5,1.5") == main.EXIT_CONFIG_ERROR

    def test_verify_exit_codes(self) -> None:
        """Test exit code 1 when any record fails and 0 otherwise."""
        passing = VerificationRecord(proposition="P1", analytic=0.0, measured=0.0, tolerance=1e-9)
        failing = VerificationRecord(proposition="P2", analytic=0.0, measured=1.0, tolerance=1e-9)

        with patch("services.experiments.run_verification", return_value=[passing]):
            assert self.run("verify") == main.EXIT_OK
        with patch("services.experiments.run_verification", return_value=[passing, failing]):
            assert self.run("verify") == main.EXIT_VERIFICATION_FAILED

        _, rows = read_csv(self.out / "verify.csv")
        assert [row["passed"] for row in rows] == ["True", "False"]

    def test_figure1_reproducible(self) -> None:
        """Test byte-identical reruns and worker-independent rows."""
        args = ("figure1", "--trials", "500", "--p-grid", "0,0.3,0.9,1", "--seed", "8")

        assert self.run(*args) == main.EXIT_OK
        first = (self.out / "figure1.csv").read_bytes()
        assert self.run(*args) == main.EXIT_OK
        assert (self.out / "figure1.csv").read_bytes() == first

        assert self.run(*args, "--workers", "2") == main.EXIT_OK
        pooled = (self.out / "figure1.csv").read_bytes()
        assert pooled.split(b"\n", 1)[1] == first.split(b"\n", 1)[1]

    def test_figure1_values(self) -> None:
        """Test blind-guess and E1 columns at a few priors."""
        assert self.run("figure1", "--trials", "500", "--p-grid", "0.2,0.8") == main.EXIT_OK
        _, rows = read_csv(self.out / "figure1.csv")

        assert float(rows[0]["blind"]) == pytest.approx(0.8)
        assert float(rows[1]["e1_analytic"]) == pytest.approx(0.6)

    def test_massdensity_preset(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test the measurability report of the product solid."""
        assert self.run("massdensity", "--preset", "uniform-solid") == main.EXIT_OK

        assert "smallest ell with ratio < 0.1: 4;" in capsys.readouterr().out
        _, rows = read_csv(self.out / "massdensity.csv")
        assert rows

    def test_config_and_preset_are_exclusive(self) -> None:
        """Test that --config and --preset together are rejected by the parser."""
        config = self.write_json("grw.json", grw_settings())

        for command in ("grw-run", "massdensity"):
            with pytest.raises(SystemExit) as info:
                self.run(command, "--config", str(config), "--preset", "two-packet")
            assert info.value.code == main.EXIT_CONFIG_ERROR

    def test_massdensity_eigenstate(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that the localized pair is measurable at the smallest scale."""
        assert self.run("massdensity", "--preset", "eigenstate") == main.EXIT_OK

        assert "smallest ell with ratio < 0.1: 1;" in capsys.readouterr().out
        _, rows = read_csv(self.out / "massdensity.csv")
        assert all(float(row["ratio"]) < 1e-12 for row in rows)

    def test_verify_reproducible(self) -> None:
        """Test byte-identical verify reruns, including across worker counts."""
        checks = [check_optimal_two_packet, check_e1_reliability, check_ratio_monte_carlo]
        args = ("verify", "--trials", "2000", "--seed", "5")

        with patch("services.verification.CHECKS", checks):
            assert self.run(*args) == main.EXIT_OK
            first = (self.out / "verify.csv").read_bytes()
            assert self.run(*args) == main.EXIT_OK
            assert (self.out / "verify.csv").read_bytes() == first
            assert self.run(*args, "--workers", "3") == main.EXIT_OK
            assert (self.out / "verify.csv").read_bytes() == first

    def test_helstrom_orthogonal_states(self) -> None:
        """Test perfect discrimination of orthogonal density matrices."""
        rho1 = self.write_json("rho1.json", {"real": [[1.0, 0.0], [0.0, 0.0]]})
        rho2 = self.write_json("rho2.json", {"real": [[0.0, 0.0], [0.0, 1.0]]})

        assert self.run("helstrom", str(rho1), str(rho2), "--p-grid", "0.3,0.6") == main.EXIT_OK

        _, rows = read_csv(self.out / "helstrom.csv")
        assert [float(row["reliability"]) for row in rows] == pytest.approx([1.0, 1.0])
        assert all(row["perfectly_distinguishable"] == "True" for row in rows)

    def test_missing_matrix_file(self) -> None:
        """Test that unreadable inputs exit with the configuration error code."""
        missing = str(Path(self.temp_dir) / "missing.json")

        assert self.run("helstrom", missing, missing) == main.EXIT_CONFIG_ERROR
