"""
Tests for result files and provenance headers.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from models.schemas import ExperimentConfig, VerificationRecord
from services.output_service import OutputService, config_hash, make_header, read_csv


class TestHeaders:
    """Test cases for provenance headers."""

    def test_config_hash_is_deterministic(self) -> None:
        """Test that equal configurations hash equally."""
        assert config_hash(ExperimentConfig(seed=3)) == config_hash(ExperimentConfig(seed=3))
        assert config_hash(ExperimentConfig(seed=3)) != config_hash(ExperimentConfig(seed=4))

    def test_config_hash_ignores_key_order(self) -> None:
        """Test canonical JSON for mappings."""
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})

    def test_config_hash_ignores_workers(self) -> None:
        """Test that the worker count does not change the hash."""
        assert config_hash(ExperimentConfig(workers=1)) == config_hash(ExperimentConfig(workers=3))
        assert config_hash({"seed": 1, "workers": 1}) == config_hash({"seed": 1, "workers": 4})
        assert config_hash({"seed": 1, "workers": 1}) == config_hash({"seed": 1})

    def test_header_fields(self) -> None:
        """Test seed, hash, version and the optional timestamp."""
        header = make_header(7, ExperimentConfig(seed=7))

        assert header["seed"] == 7
        assert len(header["config_sha256"]) == 64
        assert header["version"]
        assert "timestamp" in header
        assert "timestamp" not in make_header(7, None, timestamp=False)


class TestOutputService:
    """Test cases for OutputService."""

    def setup_method(self) -> None:
        """Set up test fixtures."""
        self.temp_dir = tempfile.mkdtemp()
        self.service = OutputService(str(Path(self.temp_dir) / "results"))
        self.header = make_header(1, None, timestamp=False)

    def teardown_method(self) -> None:
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_creates_directory(self) -> None:
        """Test that the output directory is created."""
        assert self.service.output_path.is_dir()

    def test_write_csv_models(self) -> None:
        """Test CSV rows written from pydantic records, computed fields included."""
        records = [
            VerificationRecord(proposition="P1", analytic=0.5, measured=0.5, tolerance=1e-9),
            VerificationRecord(proposition="P2", analytic=0.0, measured=0.2, tolerance=1e-9),
        ]
        path = self.service.write_csv(
            "verify.csv", records, self.header, ["proposition", "deviation", "passed"]
        )
        comment, rows = read_csv(path)

        assert comment.startswith("# seed=1 config_sha256=")
        assert [row["proposition"] for row in rows] == ["P1", "P2"]
        assert rows[0]["passed"] == "True"
        assert rows[1]["passed"] == "False"
        assert float(rows[1]["deviation"]) == 0.2

    def test_write_csv_mappings(self) -> None:
        """Test default column order from the first mapping."""
        path = self.service.write_csv("density.csv", [{"x": 0.0, "m": 1.5}], self.header)
        lines = path.read_text(encoding="utf-8").splitlines()

        assert lines[1] == "x,m"
        assert lines[2] == "0.0,1.5"

    def test_write_jsonl(self) -> None:
        """Test the header record followed by one object per line."""
        records = [{"run": 0, "T": 0.5, "X": 1.0, "I": 1}, {"run": 0, "T": 0.7, "X": 3.0, "I": 2}]
        path = self.service.write_jsonl("flashes.jsonl", records, self.header)
        lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]

        assert lines[0] == {"header": self.header}
        assert lines[1:] == records

    def test_reruns_are_byte_identical(self) -> None:
        """Test that identical inputs without timestamps give identical files."""
        records = [{"p": 0.1, "value": 0.95}]
        first = self.service.write_csv("a.csv", records, self.header).read_bytes()
        second = self.service.write_csv("b.csv", records, self.header).read_bytes()

        assert first == second
