"""
Result files: CSV tables and JSONL event streams with a provenance header.
"""

import csv
import hashlib
import json
import logging
from collections.abc import Iterable, Mapping
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

from pydantic import BaseModel

logger = logging.getLogger(__name__)

PACKAGE_NAME = "grw-collapse-limits"
UNHASHED_KEYS = frozenset({"workers"})


def tool_version() -> str:
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        return "0.1.0"


def config_hash(config: BaseModel | Mapping[str, Any] | None) -> str:
    """
    sha256 of the canonical JSON form of a configuration.

    Keys in UNHASHED_KEYS are dropped; results do not depend on them.
    """
    if config is None:
        payload: Any = {}
    elif isinstance(config, BaseModel):
        payload = config.model_dump(mode="json", exclude=set(UNHASHED_KEYS))
    else:
        payload = {key: value for key, value in config.items() if key not in UNHASHED_KEYS}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def make_header(
    seed: int,
    config: BaseModel | Mapping[str, Any] | None,
    timestamp: bool = True,
) -> dict[str, Any]:
    """Seed, config hash and version; the timestamp is the only nondeterministic field."""
    header: dict[str, Any] = {
        "seed": seed,
        "config_sha256": config_hash(config),
        "version": tool_version(),
    }
    if timestamp:
        header["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return header


def _as_row(record: BaseModel | Mapping[str, Any]) -> dict[str, Any]:
    if isinstance(record, BaseModel):
        return record.model_dump(mode="json")
    return dict(record)


class OutputService:
    """Writes result files below one output directory."""

    def __init__(self, output_path: str = "results") -> None:
        """
        Initialize output service.

        Args:
            output_path: Directory for generated result files
        """
        self.output_path = Path(output_path)
        self.output_path.mkdir(parents=True, exist_ok=True)
        logger.info(f"Output service initialized at {self.output_path}")

    def write_csv(
        self,
        filename: str,
        records: Iterable[BaseModel | Mapping[str, Any]],
        header: Mapping[str, Any],
        columns: list[str] | None = None,
    ) -> Path:
        """
        Write a CSV table preceded by a '#' comment row.

        Args:
            filename: File name inside the output directory
            records: Rows as pydantic models or mappings
            header: Provenance fields for the comment row
            columns: Column order; defaults to the first row's keys

        Returns:
            Path to the written file
        """
        rows = [_as_row(record) for record in records]
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        path = self.output_path / filename
        try:
            with path.open("w", newline="", encoding="utf-8") as handle:
                handle.write("# " + " ".join(f"{key}={value}" for key, value in header.items()))
                handle.write("\n")
                writer = csv.DictWriter(handle, fieldnames=columns, extrasaction="ignore")
                writer.writeheader()
                writer.writerows(rows)
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}")
            raise
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def write_jsonl(
        self,
        filename: str,
        records: Iterable[BaseModel | Mapping[str, Any]],
        header: Mapping[str, Any],
    ) -> Path:
        """Write one JSON object per line after a {"header": ...} record."""
        path = self.output_path / filename
        count = 0
        try:
            with path.open("w", encoding="utf-8") as handle:
                handle.write(json.dumps({"header": dict(header)}, sort_keys=True) + "\n")
                for record in records:
                    handle.write(json.dumps(_as_row(record), sort_keys=True) + "\n")
                    count += 1
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}")
            raise
        logger.info(f"Wrote {count} records to {path}")
        return path


def read_csv(path: Path) -> tuple[str, list[dict[str, str]]]:
    """Header comment and data rows of a file written by write_csv."""
    with path.open(encoding="utf-8") as handle:
        comment = handle.readline().rstrip("\n")
        rows = list(csv.DictReader(handle))
    return comment, rows
