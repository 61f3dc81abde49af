"""Shared utilities for fairsynth: bundled data lookup and output paths."""

import json
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent / "data"
REPORT_SCHEMA_VERSION = 1


def get_data_dir() -> Path:
    """Directory holding the bundled example graph and role files."""
    if not DATA_DIR.is_dir():
        no_data_msg = f"Bundled data directory is missing: {DATA_DIR}"
        raise FileNotFoundError(no_data_msg)
    return DATA_DIR


def get_output_paths(output_dir: Path | str, stem: str = "synthetic") -> dict[str, Path]:
    """Paths of every file a generate run writes, creating the directory."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    return {
        "synthetic": output_dir / f"{stem}.csv",
        "model": output_dir / f"{stem}_model.json",
        "budget": output_dir / f"{stem}_budget.json",
    }


def write_report(report: dict[str, object], path: Path | str) -> Path:
    """Write a JSON report stamped with the report schema version."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": REPORT_SCHEMA_VERSION, **report}
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path
